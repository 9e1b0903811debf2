"""Systems of inclusions over sets of integers.

Binary systems have three inclusion shapes: X >= {k} with k in {-1,0,1},
X >= Y ^ {0} (intersection with zero), and X >= Y + Z (element-wise
sum).  Larger constants, unions, and copies are compiled away by
normalize with auxiliary variables.  Least solutions are approximated by
accelerated Kleene iteration over a semilinear normal form (finite part,
one-sided progressions, full cosets), with an exactness flag; a
derivation-enumeration oracle provides sound bounded cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Iterable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "Const",
    "Inter",
    "Add",
    "EqSystem",
    "IntSetNF",
    "Verdict",
    "TRUE",
    "FALSE",
    "UNKNOWN",
    "RawExpr",
    "normalize",
    "nf_empty",
    "nf_finite",
    "nf_right_prog",
    "nf_left_prog",
    "nf_coset",
    "nf_member",
    "nf_union",
    "nf_add",
    "nf_equal",
    "nonempty_intersection_free",
    "kleene_solve",
    "membership",
    "nonempty",
    "derivation_oracle",
    "gadget_const",
    "gadget_below",
    "gadget_above",
    "gadget_all",
]


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    var: str
    value: int  # in {-1, 0, 1}


@dataclass(frozen=True)
class Inter:
    var: str
    arg: str  # X >= arg ^ {0}


@dataclass(frozen=True)
class Add:
    var: str
    left: str
    right: str


Inclusion = Union[Const, Inter, Add]


@dataclass(frozen=True)
class EqSystem:
    variables: tuple[str, ...]
    inclusions: tuple[Inclusion, ...]

    def __post_init__(self):
        declared = set(self.variables)
        if len(declared) != len(self.variables):
            raise ValueError("duplicate variable names")
        for inc in self.inclusions:
            if isinstance(inc, Const):
                if inc.value not in (-1, 0, 1):
                    raise ValueError(
                        f"binary form allows constants -1/0/1, got {inc.value}")
                refs = (inc.var,)
            elif isinstance(inc, Inter):
                refs = (inc.var, inc.arg)
            else:
                refs = (inc.var, inc.left, inc.right)
            for v in refs:
                if v not in declared:
                    raise ValueError(f"undeclared variable {v!r}")

    def require_var(self, name: str) -> None:
        if name not in self.variables:
            raise ValueError(f"unknown variable {name!r}")


class Verdict:
    """Three-valued answer; True/False only when exact."""

    __slots__ = ("value",)

    def __init__(self, value: Optional[bool]):
        self.value = value

    def __bool__(self):
        raise TypeError("Verdict is three-valued; compare explicitly")

    def __eq__(self, other):
        return isinstance(other, Verdict) and self.value == other.value

    def __hash__(self):
        return hash(self.value)

    def __repr__(self):
        return {True: "True", False: "False", None: "Unknown"}[self.value]


TRUE = Verdict(True)
FALSE = Verdict(False)
UNKNOWN = Verdict(None)


# ---------------------------------------------------------------------------
# Normalization of raw systems
# ---------------------------------------------------------------------------

# Raw expressions: ("var", name) | ("const", k) | ("add", e, e)
#                | ("union", e, e) | ("inter0", e) | ("below", m) | ("above", m)
RawExpr = tuple


class _Normalizer:
    def __init__(self):
        self.variables: list[str] = []
        self.inclusions: list[Inclusion] = []
        self.cache: dict = {}
        self.aux_count = 0

    def declare(self, v: str):
        if v not in self.variables:
            self.variables.append(v)

    def fresh(self, hint: str) -> str:
        self.aux_count += 1
        v = f"__{hint}_{self.aux_count}"
        self.declare(v)
        return v

    def zero_var(self) -> str:
        return self.const_var(0)

    def const_var(self, k: int) -> str:
        key = ("const", k)
        if key in self.cache:
            return self.cache[key]
        name = f"__eq_{k}" if k >= 0 else f"__eq_m{-k}"
        self.declare(name)
        self.cache[key] = name
        if -1 <= k <= 1:
            self.inclusions.append(Const(name, k))
        else:
            half = k // 2 if k > 0 else -((-k) // 2)
            rest = k - half
            a = self.const_var(half)
            b = self.const_var(rest)
            self.inclusions.append(Add(name, a, b))
        return name

    def copy_into(self, target: str, source: str):
        # copies are sums with {0}: target >= source + {0}
        self.inclusions.append(Add(target, source, self.zero_var()))

    def below_var(self, m: int) -> str:
        key = ("below", m)
        if key in self.cache:
            return self.cache[key]
        name = f"__lt_{m}" if m >= 0 else f"__lt_m{-m}"
        self.declare(name)
        self.cache[key] = name
        self.copy_into(name, self.const_var(m - 1))
        self.inclusions.append(Add(name, name, self.const_var(-1)))
        return name

    def above_var(self, m: int) -> str:
        key = ("above", m)
        if key in self.cache:
            return self.cache[key]
        name = f"__gt_{m}" if m >= 0 else f"__gt_m{-m}"
        self.declare(name)
        self.cache[key] = name
        self.copy_into(name, self.const_var(m + 1))
        self.inclusions.append(Add(name, name, self.const_var(1)))
        return name

    def compile(self, e: RawExpr) -> str:
        kind = e[0]
        if kind == "var":
            self.declare(e[1])
            return e[1]
        if kind == "const":
            return self.const_var(e[1])
        if kind == "below":
            return self.below_var(e[1])
        if kind == "above":
            return self.above_var(e[1])
        if kind == "add":
            a = self.compile(e[1])
            b = self.compile(e[2])
            v = self.fresh("sum")
            self.inclusions.append(Add(v, a, b))
            return v
        if kind == "union":
            v = self.fresh("or")
            for branch in (e[1], e[2]):
                self.emit(v, branch)
            return v
        if kind == "inter0":
            v = self.fresh("cap")
            self.inclusions.append(Inter(v, self.compile(e[1])))
            return v
        raise ValueError(f"unknown raw expression {kind!r}")

    def emit(self, target: str, e: RawExpr):
        """Top-level inclusion target >= e, avoiding needless auxiliaries."""
        self.declare(target)
        kind = e[0]
        if kind == "const" and -1 <= e[1] <= 1:
            self.inclusions.append(Const(target, e[1]))
        elif kind == "add" and e[1][0] == "var" and e[2][0] == "var":
            self.declare(e[1][1])
            self.declare(e[2][1])
            self.inclusions.append(Add(target, e[1][1], e[2][1]))
        elif kind == "inter0" and e[1][0] == "var":
            self.declare(e[1][1])
            self.inclusions.append(Inter(target, e[1][1]))
        elif kind == "union":
            self.emit(target, e[1])
            self.emit(target, e[2])
        elif kind == "var":
            self.copy_into(target, e[1])
        else:
            self.copy_into(target, self.compile(e))


def normalize(raw: Sequence[tuple[str, RawExpr]],
              variables: Iterable[str] = ()) -> EqSystem:
    """Compile a raw system (constants of any size, unions, copies) into
    binary form, preserving least solutions on the original variables.

    General intersections are not expressible in the raw syntax; only
    the ^ {0} form exists.
    """
    nz = _Normalizer()
    for v in variables:
        nz.declare(v)
    for target, expr in raw:
        nz.emit(target, expr)
    return EqSystem(tuple(nz.variables), tuple(nz.inclusions))


def gadget_const(m: int, name: Optional[str] = None
                 ) -> tuple[EqSystem, str]:
    """System whose least solution at the target is exactly {m}."""
    target = name or f"Z_eq_{m}"
    return normalize([(target, ("const", m))]), target


def gadget_below(m: int, name: Optional[str] = None) -> tuple[EqSystem, str]:
    """Least solution {k : k < m}."""
    target = name or f"Z_lt_{m}"
    return normalize([(target, ("below", m))]), target


def gadget_above(m: int, name: Optional[str] = None) -> tuple[EqSystem, str]:
    """Least solution {k : k > m}."""
    target = name or f"Z_gt_{m}"
    return normalize([(target, ("above", m))]), target


def gadget_all(name: str = "Z_all") -> tuple[EqSystem, str]:
    """Least solution = all integers: Z >= {0}, Z >= W + Z, W >= {1},{-1}."""
    step = f"__step_{name}"
    raw = [
        (name, ("const", 0)),
        (step, ("const", 1)),
        (step, ("const", -1)),
        (name, ("add", ("var", step), ("var", name))),
    ]
    return normalize(raw), name


# ---------------------------------------------------------------------------
# Semilinear normal form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntSetNF:
    """finite points, rightProgs {a+pn : n>=0}, leftProgs {a-pn : n>=0},
    cosets {a+g*Z}; canonicalized so components are pairwise
    non-subsumed."""

    finite: frozenset
    right: tuple[tuple[int, int], ...]
    left: tuple[tuple[int, int], ...]
    cosets: tuple[tuple[int, int], ...]

    def is_empty(self) -> bool:
        return not (self.finite or self.right or self.left or self.cosets)


def nf_empty() -> IntSetNF:
    return IntSetNF(frozenset(), (), (), ())


def _nf_build(finite, right, left, cosets) -> IntSetNF:
    """Canonicalize: absorb subsumed components, merge where possible."""
    cosets = sorted({(a % g, g) for a, g in cosets})
    # (a1,g1) inside (a2,g2) iff g2 | g1 and a1 ≡ a2 (mod g2)
    kept_cosets = []
    for a, g in cosets:
        inside = any((a2, g2) != (a, g) and g % g2 == 0 and (a - a2) % g2 == 0
                     for a2, g2 in cosets)
        if not inside:
            kept_cosets.append((a, g))
    cosets = kept_cosets

    right = sorted(set(right))
    left = sorted(set(left))
    finite = set(finite)

    # splice a right and a left progression on the same lattice into a coset
    changed = True
    while changed:
        changed = False
        for ra, rp in list(right):
            for la, lp in list(left):
                if rp == lp and (ra - la) % rp == 0 and ra <= la + rp:
                    right.remove((ra, rp))
                    left.remove((la, lp))
                    cosets = sorted(set(cosets + [(ra % rp, rp)]))
                    changed = True
                    break
            if changed:
                break

    def prog_in_cosets(a: int, p: int) -> bool:
        return any(p % g == 0 and (a - ca) % g == 0 for ca, g in cosets)

    # absorb adjacent finite points into progression anchors
    new_right = []
    for a, p in sorted(set(right)):
        while a - p in finite:
            finite.discard(a - p)
            a -= p
        new_right.append((a, p))
    right = new_right
    new_left = []
    for a, p in sorted(set(left)):
        while a + p in finite:
            finite.discard(a + p)
            a += p
        new_left.append((a, p))
    left = new_left

    def right_subsumed(a, p):
        if prog_in_cosets(a, p):
            return True
        return any((b, q) != (a, p) and p % q == 0 and a >= b
                   and (a - b) % q == 0 for b, q in right)

    def left_subsumed(a, p):
        if prog_in_cosets(a, p):
            return True
        return any((b, q) != (a, p) and p % q == 0 and a <= b
                   and (a - b) % q == 0 for b, q in left)

    right = [rp for rp in right if not right_subsumed(*rp)]
    left = [lp for lp in left if not left_subsumed(*lp)]

    def covered(v: int) -> bool:
        if any((v - a) % g == 0 for a, g in cosets):
            return True
        if any(v >= a and (v - a) % p == 0 for a, p in right):
            return True
        return any(v <= a and (a - v) % p == 0 for a, p in left)

    finite = frozenset(v for v in finite if not covered(v))
    return IntSetNF(finite, tuple(sorted(set(right))),
                    tuple(sorted(set(left))), tuple(sorted(set(cosets))))


def nf_finite(values: Iterable[int]) -> IntSetNF:
    return _nf_build(set(values), (), (), ())


def nf_right_prog(a: int, p: int) -> IntSetNF:
    if p <= 0:
        raise ValueError("period must be positive")
    return _nf_build(set(), [(a, p)], (), ())


def nf_left_prog(a: int, p: int) -> IntSetNF:
    if p <= 0:
        raise ValueError("period must be positive")
    return _nf_build(set(), (), [(a, p)], ())


def nf_coset(a: int, g: int) -> IntSetNF:
    if g <= 0:
        raise ValueError("modulus must be positive")
    return _nf_build(set(), (), (), [(a, g)])


def nf_member(u: IntSetNF, v: int) -> bool:
    if v in u.finite:
        return True
    if any(v >= a and (v - a) % p == 0 for a, p in u.right):
        return True
    if any(v <= a and (a - v) % p == 0 for a, p in u.left):
        return True
    return any((v - a) % g == 0 for a, g in u.cosets)


def nf_union(u: IntSetNF, v: IntSetNF) -> IntSetNF:
    return _nf_build(set(u.finite) | set(v.finite), u.right + v.right,
                     u.left + v.left, u.cosets + v.cosets)


def nf_equal(u: IntSetNF, v: IntSetNF) -> bool:
    return u == v


_SAT_LIMIT = 1 << 22


def _add_right_right(a, p, b, q):
    g = gcd(p, q)
    if p * q > _SAT_LIMIT:
        # exact alternative form: union over residues of the finer split
        return [("right", (a + b + q * r, p)) for r in range(p // g)] + \
               [("right", (a + b + p * r, q)) for r in range(q // g)]
    thr = a + b + p * q
    pts = set()
    n = 0
    while a + b + p * n < thr:
        m = 0
        while a + b + p * n + q * m < thr:
            pts.add(a + b + p * n + q * m)
            m += 1
        n += 1
    return [("fin", pts), ("right", (thr, g))]


def nf_add(u: IntSetNF, v: IntSetNF) -> IntSetNF:
    """Exact element-wise sum in normal form."""
    if u.is_empty() or v.is_empty():
        return nf_empty()
    finite = set()
    right = []
    left = []
    cosets = []

    def feed(items):
        for kind, payload in items:
            if kind == "fin":
                finite.update(payload)
            elif kind == "right":
                right.append(payload)
            elif kind == "left":
                left.append(payload)
            else:
                cosets.append(payload)

    uf, vf = u.finite, v.finite
    if uf and vf:
        arr = (np.array(sorted(uf), dtype=object)[:, None]
               + np.array(sorted(vf), dtype=object)[None, :])
        finite.update(int(x) for x in arr.ravel())
    for c in uf:
        for a, p in v.right:
            right.append((a + c, p))
        for a, p in v.left:
            left.append((a + c, p))
        for a, g in v.cosets:
            cosets.append((a + c, g))
    for c in vf:
        for a, p in u.right:
            right.append((a + c, p))
        for a, p in u.left:
            left.append((a + c, p))
        for a, g in u.cosets:
            cosets.append((a + c, g))

    for a, p in u.right:
        for b, q in v.right:
            feed(_add_right_right(a, p, b, q))
        for b, q in v.left:
            cosets.append((a + b, gcd(p, q)))
        for b, g in v.cosets:
            cosets.append((a + b, gcd(p, g)))
    for a, p in u.left:
        for b, q in v.left:
            items = _add_right_right(-a, p, -b, q)
            for kind, payload in items:
                if kind == "fin":
                    finite.update(-x for x in payload)
                else:
                    left.append((-payload[0], payload[1]))
        for b, q in v.right:
            cosets.append((a + b, gcd(p, q)))
        for b, g in v.cosets:
            cosets.append((a + b, gcd(p, g)))
    for a, g in u.cosets:
        for b, q in v.right:
            cosets.append((a + b, gcd(g, q)))
        for b, q in v.left:
            cosets.append((a + b, gcd(g, q)))
        for b, h in v.cosets:
            cosets.append((a + b, gcd(g, h)))

    return _nf_build(finite, right, left, cosets)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def nonempty_intersection_free(s: EqSystem, target: str) -> bool:
    """Least-solution non-emptiness via productivity fixpoint.

    Variables act as grammar nonterminals; Add is concatenation; a
    constant inclusion makes its variable productive.  Inter inclusions
    are rejected.
    """
    s.require_var(target)
    if any(isinstance(inc, Inter) for inc in s.inclusions):
        raise ValueError("system contains intersections; use nonempty()")
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for inc in s.inclusions:
            if isinstance(inc, Const):
                if inc.var not in productive:
                    productive.add(inc.var)
                    changed = True
            elif isinstance(inc, Add):
                if (inc.var not in productive and inc.left in productive
                        and inc.right in productive):
                    productive.add(inc.var)
                    changed = True
    return target in productive


def _zero_edges(s: EqSystem) -> dict:
    """Adjacency u -> [(v, w)] for inclusions V >= U + W (either order);
    the edge preserves values of u whenever 0 is in the valuation of w."""
    adj: dict[str, list[tuple[str, str]]] = {}
    for inc in s.inclusions:
        if isinstance(inc, Add):
            adj.setdefault(inc.left, []).append((inc.var, inc.right))
            adj.setdefault(inc.right, []).append((inc.var, inc.left))
    return adj


def _period_candidates(nf: IntSetNF) -> list[int]:
    out = []
    for v in nf.finite:
        if v != 0:
            out.append(v)
    for a, p in nf.right:
        out.append(p)
        if a != 0:
            out.append(a)
    for a, p in nf.left:
        out.append(-p)
        if a != 0:
            out.append(a)
    for a, g in nf.cosets:
        out.append(g)
        out.append(-g)
    seen = []
    for v in out:
        if v not in seen:
            seen.append(v)
        if len(seen) >= 16:
            break
    return seen


def kleene_solve(s: EqSystem, budget: int = 10_000
                 ) -> tuple[dict, bool]:
    """Accelerated Kleene iteration; returns (valuation, exact).

    Progressions are injected for Add(X, Y, Z) only along
    zero-translation self-dependencies (so every injected element is
    genuinely derivable); exact=True iff a final full pass without
    acceleration adds nothing, in which case the result is the least
    solution.
    """
    nu: dict[str, IntSetNF] = {v: nf_empty() for v in s.variables}
    adj = _zero_edges(s)
    steps = 0
    exhausted = False

    def apply_inclusion(inc: Inclusion) -> bool:
        var = inc.var
        if isinstance(inc, Const):
            cand = nf_finite([inc.value])
        elif isinstance(inc, Inter):
            if not nf_member(nu[inc.arg], 0):
                return False
            cand = nf_finite([0])
        else:
            cand = nf_add(nu[inc.left], nu[inc.right])
        merged = nf_union(nu[var], cand)
        if merged == nu[var]:
            return False
        nu[var] = merged
        return True

    changed = True
    while changed and not exhausted:
        changed = False
        # reach sets are memoised per pass: mid-pass growth of nu can only
        # open more zero-translation edges, so stale entries stay sound and
        # the final (quiescent) pass sees the full edge set
        reach_memo: dict[str, set] = {}

        def reaches(src: str, dst: str) -> bool:
            if src == dst:
                return True
            cached = reach_memo.get(src)
            if cached is None:
                cached = {src}
                frontier = [src]
                while frontier:
                    nxt = []
                    for u in frontier:
                        for v, w in adj.get(u, ()):
                            if v not in cached and nf_member(nu[w], 0):
                                cached.add(v)
                                nxt.append(v)
                    frontier = nxt
                reach_memo[src] = cached
            return dst in cached

        for inc in s.inclusions:
            steps += 1
            if steps > budget:
                exhausted = True
                break
            if apply_inclusion(inc):
                changed = True
            if isinstance(inc, Add) and not nu[inc.var].is_empty():
                # acceleration along value-preserving self-dependencies
                for arg, other in ((inc.left, inc.right),
                                   (inc.right, inc.left)):
                    if nu[other].is_empty():
                        continue
                    if not reaches(inc.var, arg):
                        continue
                    for p in _period_candidates(nu[other]):
                        if p == 0:
                            continue
                        step = (nf_right_prog(0, p) if p > 0
                                else nf_left_prog(0, -p))
                        inj = nf_add(nu[inc.var], step)
                        merged = nf_union(nu[inc.var], inj)
                        if merged != nu[inc.var]:
                            nu[inc.var] = merged
                            changed = True

    exact = False
    if not exhausted:
        exact = True
        for inc in s.inclusions:
            if isinstance(inc, Const):
                cand = nf_finite([inc.value])
            elif isinstance(inc, Inter):
                cand = (nf_finite([0]) if nf_member(nu[inc.arg], 0)
                        else nf_empty())
            else:
                cand = nf_add(nu[inc.left], nu[inc.right])
            if nf_union(nu[inc.var], cand) != nu[inc.var]:
                exact = False
                break
    return nu, exact


def derivation_oracle(s: EqSystem, target: str, depth: int) -> np.ndarray:
    """Integers derivable by proof trees of height <= depth (sound
    under-approximation of the least solution), as a sorted array."""
    s.require_var(target)
    return _derive_all(s, depth)[target]


def _derive_all(s: EqSystem, depth: int) -> dict:
    # constant rules are depth-0 leaves; each level applies Inter/Add once
    seeds: dict[str, set[int]] = {v: set() for v in s.variables}
    for inc in s.inclusions:
        if isinstance(inc, Const):
            seeds[inc.var].add(inc.value)
    vals: dict[str, np.ndarray] = {
        v: np.array(sorted(seeds[v]), dtype=np.int64) for v in s.variables}
    for _ in range(depth):
        new: dict[str, list[np.ndarray]] = {v: [vals[v]] for v in s.variables}
        for inc in s.inclusions:
            if isinstance(inc, Const):
                continue
            elif isinstance(inc, Inter):
                arr = vals[inc.arg]
                if arr.size and np.any(arr == 0):
                    new[inc.var].append(np.zeros(1, dtype=np.int64))
            else:
                a, b = vals[inc.left], vals[inc.right]
                if a.size and b.size:
                    if a.size * b.size <= 4_000_000:
                        sums = (a[:, None] + b[None, :]).ravel()
                        new[inc.var].append(np.unique(sums))
                    else:
                        chunks = []
                        stepn = max(1, 4_000_000 // max(b.size, 1))
                        for i in range(0, a.size, stepn):
                            part = (a[i:i + stepn, None] + b[None, :]).ravel()
                            chunks.append(np.unique(part))
                        new[inc.var].append(
                            np.unique(np.concatenate(chunks)))
        grown = False
        nxt = {}
        for v in s.variables:
            merged = np.unique(np.concatenate(new[v])) if len(new[v]) > 1 \
                else new[v][0]
            if merged.size != vals[v].size:
                grown = True
            nxt[v] = merged
        vals = nxt
        if not grown:
            break
    return vals


def membership(s: EqSystem, target: str, k: int, backend: str = "accel",
               budget: int = 10_000, depth: int = 12) -> Verdict:
    """Is k in the least solution of target?

    accel: True if the accelerated solution contains k (always sound),
    False only when the solution is exact, else Unknown.  bounded:
    True if the derivation oracle reaches k by the depth, else Unknown.
    """
    s.require_var(target)
    if backend == "accel":
        nu, exact = kleene_solve(s, budget=budget)
        if nf_member(nu[target], k):
            return TRUE
        return FALSE if exact else UNKNOWN
    if backend == "bounded":
        arr = derivation_oracle(s, target, depth)
        if arr.size and np.any(arr == k):
            return TRUE
        return UNKNOWN
    raise ValueError(f"unknown backend {backend!r}")


def nonempty(s: EqSystem, target: str, budget: int = 10_000,
             depth: int = 12) -> Verdict:
    """Non-emptiness of the least solution, Inter inclusions included.

    Saturates the set of Inter inclusions whose argument provably
    contains 0 (greedy order; by monotonicity this decides exactly the
    instances decided by guessing an application sequence), then runs
    the productivity check on the residual system with the verified
    zero seeds."""
    s.require_var(target)
    inters = [inc for inc in s.inclusions if isinstance(inc, Inter)]
    others = [inc for inc in s.inclusions if not isinstance(inc, Inter)]
    seeded: set[str] = set()
    any_unknown = False

    def residual() -> EqSystem:
        extra = [Const(v, 0) for v in sorted(seeded)]
        return EqSystem(s.variables, tuple(others + extra))

    changed = True
    while changed:
        changed = False
        pending = [inc for inc in inters if inc.var not in seeded]
        if not pending:
            break
        # one accelerated solve (and at most one bounded pass) per round
        # answers every pending argument at once; greedy saturation order
        # is irrelevant by monotonicity
        res = residual()
        nu, exact = kleene_solve(res, budget=budget)
        bounded_vals = None
        any_unknown = False
        for inc in pending:
            if nf_member(nu[inc.arg], 0):
                seeded.add(inc.var)
                changed = True
                continue
            if exact:
                continue
            if bounded_vals is None:
                bounded_vals = _derive_all(res, depth)
            arr = bounded_vals[inc.arg]
            if arr.size and np.any(arr == 0):
                seeded.add(inc.var)
                changed = True
            else:
                any_unknown = True
    if nonempty_intersection_free(residual(), target):
        return TRUE
    return UNKNOWN if any_unknown else FALSE
