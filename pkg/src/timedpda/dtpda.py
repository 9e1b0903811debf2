"""Dense-timed pushdown automata over clocks and aged stack symbols.

A dtPDA reads timed words whose letters carry a single nondecreasing
timestamp.  Clocks advance with time and can be reset; pushed stack
symbols carry ages that advance alongside the clocks and are tested by
pop constraints.  This module provides:

- a symbolic acceptance test (``dt_accepts``) that enumerates rule
  skeletons and decides feasibility by zone satisfiability, with the
  initial ages of pushed symbols as existential variables;
- ``simplify``, which normalizes pop constraints to the form
  ``z - x OP k``, removes comparisons of ages against constants,
  removes resets from push/pop rules, and forces stored ages to start
  at zero by recording the admissible initial-age range in the symbol;
- ``untime_stack``, which replaces age tests by clock bookkeeping:
  control states track pending reset restrictions and obligations and
  fresh clocks measure the time since each restriction was imposed;
- ``dtpda_to_trpda``, which compiles a timeless-stack dtPDA into a
  timed-register PDA whose control locations are clock regions clamped
  to the maximal constant;
- ``uninitialized_wrapper``, which turns an automaton over the
  clocks-start-at-zero convention into one over the arbitrary-start
  convention by resetting every clock on the first letter.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Optional, Sequence, Union

from .automata import (Rule, TimedWord, TrPDA, UNKNOWN_AT_BOUND, make_trpda)
from .constraints import (Bound, Zone, ZoneDNF, dnf_canonical, dnf_conjoin,
                          dnf_embed, dnf_is_empty, dnf_of_zone, dnf_project,
                          dnf_true, dnf_union, span_bound, zone_conjoin,
                          zone_of, zone_project, zone_true, zone_witness)
from .definable import DefinableSet, Element
from .orbits import MinimalConstraint, enumerate_orbits_in_zone


# ---------------------------------------------------------------------------
# Clock constraints
# ---------------------------------------------------------------------------


_OPS = ("<=", ">=", "<", ">", "=")

AGE = "z"

X0 = "__x0"
XS = "__xs"


class ClockConstraintError(ValueError):
    """Raised for malformed clock-constraint text or atoms."""


@dataclass(frozen=True)
class ClockAtom:
    """One conjunct ``lhs - rhs OP k`` (``rhs`` None means ``lhs OP k``).

    Names refer to clocks; the reserved name ``z`` refers to the age of
    the stack symbol being pushed or popped.
    """

    lhs: str
    rhs: Optional[str]
    op: str
    k: int

    def __post_init__(self):
        if self.op not in _OPS:
            raise ClockConstraintError(f"unknown operator {self.op!r}")
        if not isinstance(self.k, int):
            raise ClockConstraintError("constants must be integers")

    def names(self) -> tuple[str, ...]:
        return (self.lhs,) if self.rhs is None else (self.lhs, self.rhs)


_ATOM_RE = re.compile(
    r"^\s*([A-Za-z_]\w*)\s*(?:-\s*([A-Za-z_]\w*)\s*)?"
    r"(<=|>=|==|=|<|>)\s*(-?\d+)\s*$")


def parse_clock_constraint(text: Optional[str], names: Sequence[str],
                           allowAge: bool = False) -> tuple[ClockAtom, ...]:
    """Parse ``atom & atom & ...`` where atoms are ``x OP k`` or
    ``x - y OP k``; blank or missing text is the trivial constraint."""
    if text is None or not text.strip():
        return ()
    allowed = set(names) | ({AGE} if allowAge else set())
    atoms = []
    for part in text.split("&"):
        m = _ATOM_RE.match(part)
        if m is None:
            raise ClockConstraintError(f"cannot parse atom {part!r}")
        lhs, rhs, op, k = m.group(1), m.group(2), m.group(3), int(m.group(4))
        if op == "==":
            op = "="
        for nm in (lhs,) if rhs is None else (lhs, rhs):
            if nm not in allowed:
                raise ClockConstraintError(f"unknown clock {nm!r} in {part!r}")
        atoms.append(ClockAtom(lhs, rhs, op, k))
    return tuple(atoms)


def format_clock_constraint(atoms: Sequence[ClockAtom]) -> str:
    parts = []
    for a in atoms:
        term = a.lhs if a.rhs is None else f"{a.lhs} - {a.rhs}"
        parts.append(f"{term} {a.op} {a.k}")
    return " & ".join(parts)


def _flip(op: str) -> str:
    return {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}[op]


def _holds_zero(op: str, k: int) -> bool:
    return {"<": 0 < k, "<=": 0 <= k, ">": 0 > k, ">=": 0 >= k,
            "=": 0 == k}[op]


def _rows_for(i: int, j: int, op: str, k: Union[int, Fraction]
              ) -> list[tuple[int, int, Bound]]:
    """Upper-bound rows asserting ``x_i - x_j OP k``."""
    kk = Fraction(k)
    if op == "<":
        return [(i, j, Bound(kk, True))]
    if op == "<=":
        return [(i, j, Bound(kk, False))]
    if op == ">":
        return [(j, i, Bound(-kk, True))]
    if op == ">=":
        return [(j, i, Bound(-kk, False))]
    return [(i, j, Bound(kk, False)), (j, i, Bound(-kk, False))]


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


NOP = ("nop",)


def push_op(symbol, psi: Sequence[ClockAtom] = ()) -> tuple:
    return ("push", symbol, tuple(psi))


def pop_op(symbol, psi: Sequence[ClockAtom] = ()) -> tuple:
    return ("pop", symbol, tuple(psi))


@dataclass(frozen=True)
class DtRule:
    """Transition (from, label, guard, resets, op, to).

    ``op`` is ``("nop",)``, ``("push", symbol, psi)`` or
    ``("pop", symbol, psi)``.  Push constraints restrict the initial
    age ``z`` of the pushed symbol; pop constraints relate the age of
    the popped symbol to the clocks.  Guards are evaluated before the
    resets take effect.
    """

    frm: object
    inp: Optional[str]
    guard: tuple[ClockAtom, ...]
    resets: frozenset
    op: tuple
    to: object


@dataclass(frozen=True)
class DtPDA:
    locations: tuple
    inputs: tuple[str, ...]
    stack: tuple
    clocks: tuple[str, ...]
    initial: object
    finals: frozenset
    rules: tuple[DtRule, ...]


@dataclass(frozen=True)
class DtConfiguration:
    """Location, clock valuation, and stack of (symbol, age) pairs with
    the top of the stack at the end.  Ages and clocks advance uniformly
    under time elapse."""

    location: object
    clocks: tuple  # ((clock, value) pairs)
    stack: tuple   # ((symbol, age) pairs, top last)

    def elapse(self, t: Union[int, Fraction]) -> "DtConfiguration":
        tt = Fraction(t)
        if tt < 0:
            raise ValueError("time cannot flow backwards")
        return DtConfiguration(
            self.location,
            tuple((x, v + tt) for x, v in self.clocks),
            tuple((s, a + tt) for s, a in self.stack))


@dataclass(frozen=True)
class UntimingState:
    """Control state (base, restrictions, obligations).

    ``restrictions`` holds triples (clock, op, k) with op in {<, <=}
    recording that any reset of the clock before the matching pop must
    happen within k of the push that imposed it; ``obligations`` holds
    triples with op in {>, >=} recording resets that still have to
    happen at least k after the push."""

    base: object
    restrictions: frozenset
    obligations: frozenset

    def __str__(self):
        def fs(s):
            return ",".join(f"{x}{op}{k}" for x, op, k in
                            sorted(s, key=lambda t: (t[0], t[1], t[2])))
        return f"{self.base}[R:{fs(self.restrictions)}|O:{fs(self.obligations)}]"


def make_dtpda(locations: Sequence, inputs: Sequence[str], stack: Sequence,
               clocks: Sequence[str], rules: Sequence[DtRule],
               initial, finals: Sequence) -> DtPDA:
    """Validated construction; guards range over the clocks, push
    constraints over the age only, pop constraints over clocks and age."""
    locs = tuple(locations)
    locset = set(locs)
    if len(locset) != len(locs):
        raise ValueError("duplicate locations")
    cls = tuple(clocks)
    clset = set(cls)
    if len(clset) != len(cls):
        raise ValueError("duplicate clocks")
    if AGE in clset:
        raise ValueError(f"clock name {AGE!r} is reserved for symbol ages")
    if initial not in locset:
        raise ValueError(f"initial location {initial!r} not declared")
    fins = frozenset(finals)
    if not fins <= locset:
        raise ValueError("final locations must be declared")
    stk = tuple(stack)
    stkset = set(stk)
    inps = tuple(inputs)
    inpset = set(inps)
    out = []
    for r in rules:
        if r.frm not in locset or r.to not in locset:
            raise ValueError(f"rule endpoint missing: {r.frm!r} -> {r.to!r}")
        if r.inp is not None and r.inp not in inpset:
            raise ValueError(f"unknown input letter {r.inp!r}")
        for a in r.guard:
            for nm in a.names():
                if nm not in clset:
                    raise ValueError(f"guard uses unknown clock {nm!r}")
        if not frozenset(r.resets) <= clset:
            raise ValueError("resets must name declared clocks")
        kind = r.op[0]
        if kind == "nop":
            if r.op != NOP:
                raise ValueError("malformed nop operation")
        elif kind in ("push", "pop"):
            _, sym, psi = r.op
            if sym not in stkset:
                raise ValueError(f"unknown stack symbol {sym!r}")
            for a in psi:
                for nm in a.names():
                    if nm == AGE:
                        continue
                    if kind == "push":
                        raise ValueError(
                            "push constraints may only mention the age")
                    if nm not in clset:
                        raise ValueError(
                            f"pop constraint uses unknown clock {nm!r}")
        else:
            raise ValueError(f"unknown operation kind {kind!r}")
        out.append(DtRule(r.frm, r.inp, tuple(r.guard), frozenset(r.resets),
                          r.op, r.to))
    return DtPDA(locs, inps, stk, cls, initial, fins, tuple(out))


# ---------------------------------------------------------------------------
# Symbolic acceptance
# ---------------------------------------------------------------------------


class NonMonotonicWordError(ValueError):
    """Raised when timestamps decrease along the input word."""


def _atom_rows(atom: ClockAtom, tau: int, cv: dict, zvar: Optional[int]
               ) -> Optional[list[tuple[int, int, Bound]]]:
    """Rows for one atom at transition-time variable ``tau``; clock
    values are ``tau - cv[x]`` and the age is ``tau - zvar``.  Returns
    None when the atom is a false constant."""
    def ref(nm):
        if nm == AGE:
            if zvar is None:
                raise ClockConstraintError("age used outside push/pop")
            return zvar
        return cv[nm]

    if atom.rhs is None:
        return _rows_for(tau, ref(atom.lhs), atom.op, atom.k)
    a, b = ref(atom.rhs), ref(atom.lhs)
    if a == b:
        return [] if _holds_zero(atom.op, atom.k) else None
    return _rows_for(a, b, atom.op, atom.k)


class _DtNode:
    __slots__ = ("loc", "cv", "stk", "zone", "pos", "silent", "last", "lets")

    def __init__(self, loc, cv, stk, zone, pos, silent, last, lets=()):
        self.loc = loc
        self.cv = cv          # clock -> variable index
        self.stk = stk        # ((symbol, birth variable) pairs, top last)
        self.zone = zone      # canonical, variable 0 = time origin
        self.pos = pos
        self.silent = silent
        self.last = last      # variable of the previous transition time
        self.lets = lets      # ((label, time variable) pairs, sampler only)


def _dt_initial(a: DtPDA, uninitialized: bool) -> _DtNode:
    if uninitialized:
        cv = {x: 1 + i for i, x in enumerate(a.clocks)}
        return _DtNode(a.initial, cv, (), zone_true(1 + len(a.clocks)),
                       0, 0, None)
    cv = {x: 0 for x in a.clocks}
    return _DtNode(a.initial, cv, (), zone_true(1), 0, 0, 0)


def _dt_apply(a: DtPDA, nd: _DtNode, r: DtRule,
              stamp: Optional[Fraction], record_letter: bool
              ) -> Optional[_DtNode]:
    dim = nd.zone.dim
    tau = dim
    dim += 1
    rows: list[tuple[int, int, Bound]] = []
    if nd.last is not None:
        rows.append((nd.last, tau, Bound(Fraction(0), False)))
    else:
        rows.extend((v, tau, Bound(Fraction(0), False))
                    for v in nd.cv.values())
    if stamp is not None:
        rows.extend(_rows_for(tau, 0, "=", stamp))
    for atom in r.guard:
        ar = _atom_rows(atom, tau, nd.cv, None)
        if ar is None:
            return None
        rows.extend(ar)
    kind = r.op[0]
    stk = nd.stk
    beta = None
    if kind == "push":
        beta = dim
        dim += 1
        rows.append((beta, tau, Bound(Fraction(0), False)))
        for atom in r.op[2]:
            ar = _atom_rows(atom, tau, nd.cv, beta)
            if ar is None:
                return None
            rows.extend(ar)
        stk = stk + ((r.op[1], beta),)
    elif kind == "pop":
        if not stk or stk[-1][0] != r.op[1]:
            return None
        bvar = stk[-1][1]
        for atom in r.op[2]:
            ar = _atom_rows(atom, tau, nd.cv, bvar)
            if ar is None:
                return None
            rows.extend(ar)
        stk = stk[:-1]
    grown = Zone(dim, tuple(
        tuple((nd.zone.upper[i][j] if i != j else None)
              if i < nd.zone.dim and j < nd.zone.dim else None
              for j in range(dim))
        for i in range(dim)))
    z2 = zone_conjoin(grown, zone_of(dim, rows))
    if z2.empty:
        return None
    cv2 = dict(nd.cv)
    for x in r.resets:
        cv2[x] = tau
    lets = nd.lets
    if record_letter and r.inp is not None:
        lets = lets + ((r.inp, tau),)
    keep = sorted({0, tau} | set(cv2.values())
                  | {v for _, v in stk} | {v for _, v in lets})
    remap = {v: i for i, v in enumerate(keep)}
    return _DtNode(r.to,
                   {x: remap[v] for x, v in cv2.items()},
                   tuple((s, remap[v]) for s, v in stk),
                   zone_project(z2, keep),
                   nd.pos, nd.silent, remap[tau],
                   tuple((l, remap[v]) for l, v in lets))


def _word_items(w) -> list[tuple[str, Fraction]]:
    items = []
    for e in w:
        if isinstance(e, Element):
            if len(e.point) != 1:
                raise ValueError("dtPDA letters carry a single timestamp")
            items.append((e.label, e.point[0]))
        else:
            lab, t = e
            items.append((lab, Fraction(t)))
    return items


def dt_accepts(a: DtPDA, w, maxSilent: Optional[int] = None, *,
               uninitialized: bool = False):
    """Symbolic membership: True / False / UNKNOWN_AT_BOUND.

    Timestamps fix the elapse between transitions; initial ages of
    pushed symbols stay existential and are decided by zone
    satisfiability.  ``maxSilent`` bounds consecutive silent rules
    (default ``2*len(w) + 4``); a False verdict is exact only when no
    branch was cut at that bound, otherwise UNKNOWN_AT_BOUND is
    returned.  Under ``uninitialized`` the clocks start with arbitrary
    nonnegative values and the first timestamp is unconstrained;
    otherwise the clocks start at 0 at time 0.
    """
    items = _word_items(w)
    for lab, _ in items:
        if lab not in a.inputs:
            raise ValueError(f"letter {lab!r} not in the input alphabet")
    for (_, s), (_, t) in zip(items, items[1:]):
        if t < s:
            raise NonMonotonicWordError(
                f"timestamps decrease: {s} then {t}")
    if maxSilent is None:
        maxSilent = 2 * len(items) + 4
    truncated = False
    todo = [_dt_initial(a, uninitialized)]
    while todo:
        nd = todo.pop()
        if nd.pos == len(items) and nd.loc in a.finals:
            return True
        for r in a.rules:
            if r.frm != nd.loc:
                continue
            if r.inp is None:
                if nd.silent >= maxSilent:
                    truncated = True
                    continue
                nxt = _dt_apply(a, nd, r, None, False)
                if nxt is not None:
                    nxt.silent = nd.silent + 1
                    todo.append(nxt)
            elif nd.pos < len(items) and r.inp == items[nd.pos][0]:
                nxt = _dt_apply(a, nd, r, items[nd.pos][1], False)
                if nxt is not None:
                    nxt.pos = nd.pos + 1
                    nxt.silent = 0
                    todo.append(nxt)
    return UNKNOWN_AT_BOUND if truncated else False


def sample_words(a: DtPDA, maxLetters: int, maxSilent: Optional[int] = None,
                 *, rng: Optional[random.Random] = None, limit: int = 50,
                 perSkeleton: int = 3, uninitialized: bool = False
                 ) -> list[TimedWord]:
    """Sample accepted timed words: enumerate accepting rule skeletons
    with free letter timestamps, then extract satisfying timestamp
    vectors (several per skeleton, diversified by random extra bounds)."""
    if rng is None:
        rng = random.Random(0)
    if maxSilent is None:
        maxSilent = 2 * maxLetters + 4
    out: list[TimedWord] = []
    seen: set[tuple] = set()

    def emit(nd: _DtNode):
        zones = [nd.zone]
        for _ in range(max(0, perSkeleton - 1)):
            rows = []
            for _, v in nd.lets:
                if rng.random() < 0.5:
                    rows.append((0, v, Bound(Fraction(-rng.randint(0, 4)),
                                             False)))
            if rows:
                zones.append(zone_conjoin(nd.zone,
                                          zone_of(nd.zone.dim, rows)))
        for z in zones:
            p = zone_witness(z)
            if p is None:
                continue
            stamps = tuple((lab, p[v] - p[0]) for lab, v in nd.lets)
            if stamps in seen:
                continue
            seen.add(stamps)
            out.append(TimedWord(tuple(Element(lab, (t,))
                                       for lab, t in stamps)))

    todo = [_dt_initial(a, uninitialized)]
    while todo and len(out) < limit:
        nd = todo.pop()
        if nd.loc in a.finals:
            emit(nd)
            if len(out) >= limit:
                break
        rules = [r for r in a.rules if r.frm == nd.loc]
        rng.shuffle(rules)
        for r in rules:
            if r.inp is None:
                if nd.silent >= maxSilent:
                    continue
                nxt = _dt_apply(a, nd, r, None, False)
                if nxt is not None:
                    nxt.silent = nd.silent + 1
                    todo.append(nxt)
            else:
                if nd.pos >= maxLetters:
                    continue
                nxt = _dt_apply(a, nd, r, None, True)
                if nxt is not None:
                    nxt.pos = nd.pos + 1
                    nxt.silent = 0
                    todo.append(nxt)
    return out[:limit]


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def _fresh(base: str, used: set) -> str:
    name = base
    n = 0
    while name in used:
        n += 1
        name = f"{base}_{n}"
    used.add(name)
    return name


def _split_eq(atom: ClockAtom) -> tuple[ClockAtom, ...]:
    if atom.op != "=":
        return (atom,)
    return (ClockAtom(atom.lhs, atom.rhs, "<=", atom.k),
            ClockAtom(atom.lhs, atom.rhs, ">=", atom.k))


def _age_interval(psi: Sequence[ClockAtom]):
    """Solution range of a constraint over the age alone, floored at 0.

    Returns None when empty, ``("pt", k)`` for a single point, or
    ``("iv", lo, hi, loClosed, hiClosed)`` with ``hi`` None for an
    unbounded range."""
    lo, loStrict = 0, False
    hi, hiStrict = None, False
    for a in psi:
        if a.lhs != AGE or a.rhs is not None:
            raise ClockConstraintError(
                "push constraints may only mention the age")
        for b in _split_eq(a):
            if b.op in (">", ">="):
                cand = (b.k, b.op == ">")
                if (cand[0], cand[1]) > (lo, loStrict):
                    lo, loStrict = cand
            else:
                cand = (b.k, b.op == "<")
                if hi is None or (cand[0], not cand[1]) < (hi, not hiStrict):
                    hi, hiStrict = cand
    if hi is not None:
        if lo > hi or (lo == hi and (loStrict or hiStrict)):
            return None
        if lo == hi:
            return ("pt", lo)
    return ("iv", lo, hi, not loStrict, not hiStrict if hi is not None
            else False)


def _age_parts(psi: Sequence[ClockAtom]) -> list[tuple]:
    """Split the admissible initial-age range into points and open
    intervals: ``("pt", k)`` and ``("iv", a, b)`` pieces (``b`` None
    for an unbounded interval)."""
    rng = _age_interval(psi)
    if rng is None:
        return []
    if rng[0] == "pt":
        return [rng]
    _, lo, hi, loClosed, hiClosed = rng
    parts: list[tuple] = []
    if loClosed:
        parts.append(("pt", lo))
    if hi is None:
        parts.append(("iv", lo, None))
    else:
        if lo < hi:
            parts.append(("iv", lo, hi))
        if hiClosed:
            parts.append(("pt", hi))
    return parts


def _update_pop(psi: Sequence[ClockAtom], part: tuple
                ) -> tuple[ClockAtom, ...]:
    """Rewrite a pop constraint on the true age into one on the stored
    age when the initial age ranged over ``part`` at push time."""
    out = []
    for a in psi:
        if a.lhs != AGE or a.rhs is None:
            raise ClockConstraintError("pop atoms must have the form z - x")
        for b in _split_eq(a):
            if part[0] == "pt":
                out.append(ClockAtom(AGE, b.rhs, b.op, b.k - part[1]))
            elif b.op in ("<", "<="):
                out.append(ClockAtom(AGE, b.rhs, "<", b.k - part[1]))
            else:
                if part[2] is not None:
                    out.append(ClockAtom(AGE, b.rhs, ">", b.k - part[2]))
    return tuple(out)


_AGE_ZERO = (ClockAtom(AGE, None, "=", 0),)


def simplify(a: DtPDA) -> DtPDA:
    """Normalize so that: pop atoms have the form ``z - x OP k``; pops
    never compare the age against a constant; push and pop rules reset
    nothing; stored ages start at 0, with the admissible initial-age
    range recorded in the pushed symbol as ``(symbol, part)`` and pop
    constraints shifted accordingly.  Language preserving; idempotent.
    """
    used = set(a.locations)
    locs = list(a.locations)
    clocks = a.clocks + tuple(c for c in (X0, XS) if c not in a.clocks)

    # Pop atoms to z - x form; clock-only atoms move into the guard.
    rules1: list[DtRule] = []
    for r in a.rules:
        if r.op[0] != "pop":
            rules1.append(r)
            continue
        guard = list(r.guard)
        psi: list[ClockAtom] = []
        dead = False
        for atom in r.op[2]:
            if atom.lhs == AGE and atom.rhs == AGE:
                if not _holds_zero(atom.op, atom.k):
                    dead = True
                    break
            elif atom.lhs == AGE:
                psi.extend(_split_eq(atom))
            elif atom.rhs == AGE:
                psi.extend(_split_eq(
                    ClockAtom(AGE, atom.lhs, _flip(atom.op), -atom.k)))
            else:
                guard.append(atom)
        if dead:
            continue
        rules1.append(DtRule(r.frm, r.inp, tuple(guard), r.resets,
                             pop_op(r.op[1], psi), r.to))

    # Age-versus-constant pop atoms through a zero-test clock.
    rules2: list[DtRule] = []
    for r in rules1:
        if r.op[0] != "pop" or not any(at.rhs is None for at in r.op[2]):
            rules2.append(r)
            continue
        mid = _fresh("__zk", used)
        locs.append(mid)
        psi = tuple(at if at.rhs is not None
                    else ClockAtom(AGE, X0, at.op, at.k)
                    for at in r.op[2])
        rules2.append(DtRule(r.frm, r.inp, r.guard, frozenset({X0}),
                             NOP, mid))
        rules2.append(DtRule(mid, None,
                             r.guard + (ClockAtom(X0, None, "=", 0),),
                             r.resets, pop_op(r.op[1], psi), r.to))

    # No resets on push/pop rules.
    rules3: list[DtRule] = []
    for r in rules2:
        if r.op[0] == "nop" or not r.resets:
            rules3.append(r)
            continue
        m0 = _fresh("__rs", used)
        m1 = _fresh("__rs", used)
        locs.extend((m0, m1))
        star = (ClockAtom(XS, None, "=", 0),)
        rules3.append(DtRule(r.frm, r.inp, r.guard, frozenset({XS}),
                             NOP, m0))
        rules3.append(DtRule(m0, None, star, frozenset(), r.op, m1))
        rules3.append(DtRule(m1, None, star, r.resets, NOP, r.to))

    # Initial ages to 0, admissible ranges into the symbols.
    if all(r.op[2] == _AGE_ZERO for r in rules3 if r.op[0] == "push"):
        rules4 = rules3
        stack = a.stack
    else:
        pushed: dict[object, list[tuple]] = {}
        rules4 = []
        for r in rules3:
            if r.op[0] != "push":
                continue
            for part in _age_parts(r.op[2]):
                pushed.setdefault(r.op[1], [])
                if part not in pushed[r.op[1]]:
                    pushed[r.op[1]].append(part)
                rules4.append(DtRule(r.frm, r.inp, r.guard, r.resets,
                                     push_op((r.op[1], part), _AGE_ZERO),
                                     r.to))
        for r in rules3:
            if r.op[0] == "push":
                continue
            if r.op[0] == "nop":
                rules4.append(r)
                continue
            for part in pushed.get(r.op[1], ()):
                rules4.append(DtRule(r.frm, r.inp, r.guard, r.resets,
                                     pop_op((r.op[1], part),
                                            _update_pop(r.op[2], part)),
                                     r.to))
        stack = tuple(sorted(((s, p) for s, parts in pushed.items()
                              for p in parts), key=repr))

    return DtPDA(tuple(locs), a.inputs, stack, clocks, a.initial,
                 a.finals, tuple(rules4))


# ---------------------------------------------------------------------------
# Stack untiming
# ---------------------------------------------------------------------------


def _require_simplified(a: DtPDA) -> None:
    for r in a.rules:
        if r.op[0] == "nop":
            continue
        if r.resets:
            raise ValueError(
                "untime_stack requires a simplified automaton "
                "(push/pop rule carries resets; run simplify first)")
        if r.op[0] == "push":
            if r.op[2] != _AGE_ZERO:
                raise ValueError(
                    "untime_stack requires a simplified automaton "
                    "(push constraint is not z = 0; run simplify first)")
        else:
            for at in r.op[2]:
                if at.lhs != AGE or at.rhs is None or at.rhs == AGE:
                    raise ValueError(
                        "untime_stack requires a simplified automaton "
                        "(pop atom not of the form z - x; run simplify "
                        "first)")


def _subsets(items: Sequence) -> list[frozenset]:
    out = []
    seq = list(items)
    for n in range(len(seq) + 1):
        out.extend(frozenset(c) for c in combinations(seq, n))
    return out


def _hat(x: str, op: str, k: int) -> str:
    tag = {"<": "lt", "<=": "le", ">": "gt", ">=": "ge"}[op]
    return f"__h_{x}_{tag}{str(k).replace('-', 'm')}"


def _canon_psi(psi: Sequence[ClockAtom]) -> tuple[ClockAtom, ...]:
    split = [b for a in psi for b in _split_eq(a)]
    return tuple(sorted(set(split),
                        key=lambda a: (a.lhs, a.rhs or "", a.op, a.k)))


def _prune_guard(atoms: Sequence[ClockAtom]
                 ) -> Optional[tuple[ClockAtom, ...]]:
    """Drop atoms vacuous for nonnegative clocks; None when one is
    unsatisfiable outright."""
    out = []
    for a in atoms:
        if a.rhs is None:
            if a.op in (">=", ">") and a.k < (0 if a.op == ">" else 1):
                continue
            if (a.op == "<" and a.k <= 0) or \
                    (a.op in ("<=", "=") and a.k < 0):
                return None
        out.append(a)
    return tuple(out)


def untime_stack(a: DtPDA) -> DtPDA:
    """Move all age tests into clock bookkeeping.

    Control states become (base, restrictions, obligations) triples;
    stack symbols become (symbol, guessed pop constraint, restrictions,
    parked obligations) tuples; one fresh clock per distinct pop atom
    measures the time since the push that imposed it.  Output pop
    constraints are trivial.  Clock count grows linearly in the number
    of distinct pop atoms, locations exponentially.
    """
    _require_simplified(a)
    les: list[tuple] = []
    ges: list[tuple] = []
    psis: dict[object, list[tuple[ClockAtom, ...]]] = {}
    for r in a.rules:
        if r.op[0] != "pop":
            continue
        psi = _canon_psi(r.op[2])
        psis.setdefault(r.op[1], [])
        if psi not in psis[r.op[1]]:
            psis[r.op[1]].append(psi)
        for at in psi:
            trip = (at.rhs, at.op, at.k)
            if at.op in ("<", "<="):
                if trip not in les:
                    les.append(trip)
            else:
                if trip not in ges:
                    ges.append(trip)
    r_sets = _subsets(les)
    o_sets = _subsets(ges)
    states = [UntimingState(p, R, O)
              for p in a.locations for R in r_sets for O in o_sets]
    hats = tuple(_hat(*t) for t in sorted(les + ges))
    clocks = a.clocks + tuple(h for h in hats if h not in a.clocks)
    rules: list[DtRule] = []
    symbols: set = set()

    def restr(psi):
        return frozenset((at.rhs, at.op, at.k) for at in psi
                         if at.op in ("<", "<="))

    def oblig(psi):
        return frozenset((at.rhs, at.op, at.k) for at in psi
                         if at.op in (">", ">="))

    for r in a.rules:
        if r.op[0] == "nop":
            for R in r_sets:
                checks = tuple(ClockAtom(_hat(x, op, k), None, op, k)
                               for x, op, k in sorted(R) if x in r.resets)
                for O in o_sets:
                    due = [t for t in sorted(O) if t[0] in r.resets]
                    for disc in _subsets(due):
                        guard = _prune_guard(r.guard + checks + tuple(
                            ClockAtom(_hat(x, op, k), None, op, k)
                            for x, op, k in sorted(disc)))
                        if guard is None:
                            continue
                        rules.append(DtRule(
                            UntimingState(r.frm, R, O), r.inp, guard,
                            r.resets, NOP,
                            UntimingState(r.to, R, O - disc)))
        elif r.op[0] == "push":
            alpha = r.op[1]
            guesses = list(psis.get(alpha, []))
            if () not in guesses:
                guesses.append(())
            for psi in guesses:
                M, N = restr(psi), oblig(psi)
                newR = tuple(sorted(M))
                newO = tuple(sorted(N))
                for R in r_sets:
                    fresh_r = [t for t in newR if t not in R]
                    g_restr = tuple(
                        ClockAtom(x, None, _flip(op), -k)
                        for x, op, k in fresh_r)
                    t_restr = frozenset(_hat(*t) for t in fresh_r)
                    for O in o_sets:
                        parkable = [t for t in sorted(O) if t not in N]
                        for parked in _subsets(parkable):
                            for satisfied in _subsets(newO):
                                fresh_o = [t for t in newO
                                           if t not in satisfied]
                                g_obl = tuple(
                                    ClockAtom(x, None, _flip(op), -k)
                                    for x, op, k in sorted(satisfied))
                                guard = _prune_guard(
                                    r.guard + g_restr + g_obl)
                                if guard is None:
                                    continue
                                sym = (alpha, psi, R, parked)
                                symbols.add(sym)
                                rules.append(DtRule(
                                    UntimingState(r.frm, R, O), r.inp,
                                    guard,
                                    frozenset(t_restr)
                                    | frozenset(_hat(*t) for t in fresh_o),
                                    push_op(sym, _AGE_ZERO),
                                    UntimingState(
                                        r.to, R | M,
                                        (O - frozenset(parked))
                                        | frozenset(fresh_o))))
        else:
            alpha = r.op[1]
            psi = _canon_psi(r.op[2])
            guard = _prune_guard(r.guard)
            if guard is None:
                continue
            for R in r_sets:
                for R2 in r_sets:
                    for O2 in o_sets:
                        sym = (alpha, psi, R2, O2)
                        symbols.add(sym)
                        rules.append(DtRule(
                            UntimingState(r.frm, R, frozenset()), r.inp,
                            guard, frozenset(), pop_op(sym, ()),
                            UntimingState(r.to, R2, O2)))

    return DtPDA(tuple(states), a.inputs,
                 tuple(sorted(symbols, key=repr)), clocks,
                 UntimingState(a.initial, frozenset(), frozenset()),
                 frozenset(UntimingState(f, R, O) for f in a.finals
                           for R in r_sets for O in o_sets),
                 tuple(rules))


# ---------------------------------------------------------------------------
# Compilation into timed-register PDA
# ---------------------------------------------------------------------------


def _fmt_obj(o) -> str:
    if isinstance(o, str):
        return o
    if isinstance(o, ClockAtom):
        term = o.lhs if o.rhs is None else f"{o.lhs}-{o.rhs}"
        return f"{term}{o.op}{o.k}"
    if isinstance(o, frozenset):
        return "{" + ",".join(sorted(_fmt_obj(e) for e in o)) + "}"
    if isinstance(o, tuple):
        return "(" + ",".join(_fmt_obj(e) for e in o) + ")"
    if isinstance(o, UntimingState):
        return str(o)
    return str(o)


def _atom_dnf(n: int, idx: dict, atom: ClockAtom, positive: bool) -> ZoneDNF:
    """The diagonal atom (or its negation) over register space
    (x0, one register per clock); clock values are x0 - reg."""
    i, j = 1 + idx[atom.rhs], 1 + idx[atom.lhs]
    if positive:
        return dnf_of_zone(zone_of(n + 1, _rows_for(i, j, atom.op, atom.k)))
    if atom.op == "=":
        return dnf_union(
            dnf_of_zone(zone_of(n + 1, _rows_for(i, j, "<", atom.k))),
            dnf_of_zone(zone_of(n + 1, _rows_for(i, j, ">", atom.k))))
    neg = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}[atom.op]
    return dnf_of_zone(zone_of(n + 1, _rows_for(i, j, neg, atom.k)))


def _orbits_of_dnf(c: ZoneDNF) -> list[MinimalConstraint]:
    cc = dnf_canonical(c)
    s = span_bound(cc)
    if s is None:
        raise ValueError("unbounded span in a clamped region set")
    seen: dict[tuple, MinimalConstraint] = {}
    for z in cc.disjuncts:
        for m in enumerate_orbits_in_zone(z, s):
            seen.setdefault(m.key(), m)
    return [seen[k] for k in sorted(seen)]


def dtpda_to_trpda(a: DtPDA) -> TrPDA:
    """Compile a timeless-stack dtPDA (uninitialized-clocks convention)
    into a language-equivalent timed-register PDA.

    Registers: one per clock holding its last reset time, plus a
    register holding the previous transition time.  Control locations
    are clock regions: a set of clocks within the maximal constant m of
    the last transition time (one register each, clamped to
    ``0 <= x0 - reg <= m``), truth values for diagonal atoms involving
    clocks beyond m (whose registers are dropped), and one orbit of the
    resulting register set.  Constraints compile as ``x OP k`` to
    ``x0' - reg OP k`` and ``x - y OP k`` to ``reg_y - reg_x OP k``;
    silent rules advance the transition time nondeterministically.
    Only locations reachable from the initial ones are generated.
    """
    for r in a.rules:
        if r.op[0] == "pop" and r.op[2]:
            raise ValueError(
                "dtpda_to_trpda requires a timeless stack "
                "(nontrivial pop constraint on "
                f"{_fmt_obj(r.op[1])}; run untime_stack first)")

    live = set()
    m = 0
    for r in a.rules:
        atoms = r.guard + (r.op[2] if r.op[0] in ("push", "pop") else ())
        for at in atoms:
            m = max(m, abs(at.k))
            live.update(nm for nm in at.names() if nm != AGE)
    clocks = tuple(x for x in a.clocks if x in live)
    n = len(clocks)
    idx = {x: i for i, x in enumerate(clocks)}
    diag = sorted({(at.lhs, at.rhs, at.op, at.k)
                   for r in a.rules for at in r.guard
                   if at.rhs is not None},
                  key=lambda t: (t[0], t[1], t[2], t[3]))

    rules = [DtRule(r.frm, r.inp, r.guard,
                    frozenset(x for x in r.resets if x in live), r.op, r.to)
             for r in a.rules
             if r.op[0] != "push" or _age_parts(r.op[2])]

    b_sets = _subsets(clocks)
    zone_cache: dict[tuple, ZoneDNF] = {}

    def footprint(B: frozenset, D: tuple) -> ZoneDNF:
        """Register constraint over (x0, all clock registers) for
        bounded set B and diagonal truth assignment D."""
        key = (B, D)
        if key in zone_cache:
            return zone_cache[key]
        rows = []
        for x in clocks:
            if x in B:
                rows.extend(_rows_for(0, 1 + idx[x], "<=", m))
                rows.extend(_rows_for(0, 1 + idx[x], ">=", 0))
            else:
                rows.extend(_rows_for(0, 1 + idx[x], ">", m))
        out = dnf_of_zone(zone_of(n + 1, rows))
        for (lhs, rhs, op, k), bit in D:
            out = dnf_conjoin(out, _atom_dnf(
                n, idx, ClockAtom(lhs, rhs, op, k), bit))
        zone_cache[key] = out
        return out

    def kept(B: frozenset) -> list[int]:
        return [0] + [1 + idx[x] for x in clocks if x in B]

    def d_domain(B: frozenset) -> list[tuple]:
        return [t for t in diag if t[0] not in B or t[1] not in B]

    def d_assignments(B: frozenset) -> list[tuple]:
        dom = d_domain(B)
        out = [()]
        for t in dom:
            out = [asg + ((t, bit),) for asg in out for bit in (False, True)]
        return out

    def loc_label(l, B, D, orb: MinimalConstraint) -> str:
        bs = "".join("1" if x in B else "0" for x in clocks)
        ds = "".join("1" if bit else "0" for _, bit in D)
        fs = ",".join(str(f) for f in orb.floors)
        cs = ",".join(str(c) for c in orb.classes)
        return f"{_fmt_obj(l)}#{bs}#{ds}#{fs};{cs}"

    locs: dict[tuple, tuple[str, int, ZoneDNF]] = {}
    initial_keys: list[tuple] = []
    todo: list[tuple] = []

    def register(l, B, D, orb) -> tuple:
        key = (l, B, D, orb.key())
        if key not in locs:
            dim = 1 + sum(1 for x in clocks if x in B)
            locs[key] = (loc_label(l, B, D, orb), dim,
                         dnf_of_zone(orb.to_zone()))
            todo.append((l, B, D, orb))
        return key

    for B in b_sets:
        for D in d_assignments(B):
            fp = footprint(B, D)
            proj = dnf_project(fp, kept(B))
            if dnf_is_empty(proj):
                continue
            for orb in _orbits_of_dnf(proj):
                key = register(a.initial, B, D, orb)
                if key not in initial_keys:
                    initial_keys.append(key)

    out_rules: list[Rule] = []
    sym_labels: dict[object, str] = {}

    while todo:
        l, B, D, orb = todo.pop()
        src_label = locs[(l, B, D, orb.key())][0]
        src_kept = kept(B)
        for r in rules:
            if r.frm != l:
                continue
            has_t = r.inp is not None
            old_n = n + 1
            t_pos = old_n if has_t else None
            new0 = old_n + (1 if has_t else 0)
            dim = new0 + n + 1
            rows = [(0, new0 + 0, Bound(Fraction(0), False))]
            if has_t:
                rows.extend(_rows_for(t_pos, new0 + 0, "=", 0))
            for x in clocks:
                ov, nv = 1 + idx[x], new0 + 1 + idx[x]
                if x in r.resets:
                    rows.extend(_rows_for(nv, new0 + 0, "=", 0))
                else:
                    rows.extend(_rows_for(nv, ov, "=", 0))
            dead = False
            for at in r.guard:
                if at.rhs is None:
                    rows.extend(_rows_for(new0 + 0, 1 + idx[at.lhs],
                                          at.op, at.k))
                else:
                    ar = _atom_rows(at, new0 + 0,
                                    {x: 1 + idx[x] for x in clocks}, None)
                    if ar is None:
                        dead = True
                        break
                    rows.extend(ar)
            if dead:
                continue
            base = dnf_of_zone(zone_of(dim, rows))
            base = dnf_conjoin(base, dnf_embed(
                footprint(B, D), dim, list(range(old_n))))
            base = dnf_conjoin(base, dnf_embed(
                dnf_of_zone(orb.to_zone()), dim, src_kept))
            if dnf_is_empty(base):
                continue
            for B2 in b_sets:
                # Reset clocks restart at 0, hence bounded; clocks
                # already beyond m and not reset stay beyond m.
                if not (frozenset(r.resets) <= B2 <= B | r.resets):
                    continue
                for D2 in d_assignments(B2):
                    full = dnf_conjoin(base, dnf_embed(
                        footprint(B2, D2), dim,
                        list(range(new0, new0 + n + 1))))
                    if dnf_is_empty(full):
                        continue
                    tgt_kept = [new0 + v for v in kept(B2)]
                    for orb2 in _orbits_of_dnf(
                            dnf_project(full, tgt_kept)):
                        register(r.to, B2, D2, orb2)
                        tgt_label = locs[(r.to, B2, D2, orb2.key())][0]
                        conj = dnf_conjoin(full, dnf_embed(
                            dnf_of_zone(orb2.to_zone()), dim, tgt_kept))
                        keep = src_kept + ([t_pos] if has_t else []) \
                            + tgt_kept
                        cons = dnf_project(conj, keep)
                        if dnf_is_empty(cons):
                            continue
                        pops = ()
                        pushes = ()
                        if r.op[0] in ("push", "pop"):
                            sym = r.op[1]
                            if sym not in sym_labels:
                                sym_labels[sym] = _fmt_obj(sym)
                            if r.op[0] == "push":
                                pushes = (sym_labels[sym],)
                            else:
                                pops = (sym_labels[sym],)
                        out_rules.append(Rule(src_label, pops, r.inp,
                                              tgt_label, pushes, cons))

    state_rows = tuple(locs[k] for k in sorted(locs, key=lambda k: locs[k][0]))
    states = DefinableSet(state_rows)
    if not sym_labels:
        for s in a.stack:
            sym_labels[s] = _fmt_obj(s)
            break
        if not sym_labels:
            sym_labels["__bot"] = "__bot"
    stack = DefinableSet(tuple(
        (lab, 0, dnf_true(0)) for lab in sorted(sym_labels.values())))
    inputs = DefinableSet(tuple((lab, 1, dnf_true(1)) for lab in a.inputs))
    initial = DefinableSet(tuple(
        locs[k] for k in sorted(initial_keys, key=lambda k: locs[k][0])))
    final = DefinableSet(tuple(
        row for k, row in ((k, locs[k]) for k in sorted(
            locs, key=lambda k: locs[k][0]))
        if k[0] in a.finals))
    return make_trpda(states, inputs, stack, initial, final, out_rules)


# ---------------------------------------------------------------------------
# Convention wrapper
# ---------------------------------------------------------------------------


def uninitialized_wrapper(a: DtPDA) -> DtPDA:
    """Prefix one letter that resets every clock, so that under the
    arbitrary-start convention the result accepts exactly
    (b, t) w' for b in the alphabet and w' a shift by t of a word
    accepted by ``a`` under the clocks-start-at-zero convention.
    Preserves non-emptiness."""
    used = set(a.locations)
    u0 = _fresh("__u0", used)
    new = tuple(DtRule(u0, lab, (), frozenset(a.clocks), NOP, a.initial)
                for lab in a.inputs)
    return DtPDA(a.locations + (u0,), a.inputs, a.stack, a.clocks,
                 u0, a.finals, new + a.rules)
