"""Exact difference constraints over the rationals.

A *zone* is a conjunction of atoms ``x_i - x_j < k`` / ``x_i - x_j <= k``
kept as a matrix of upper bounds; a *constraint* is a positive boolean
combination of atoms, stored in disjunctive normal form (ZoneDNF).
Everything is exact: constants are Fractions (integers in all parsed
input), canonicalization is all-pairs shortest-path closure, and
satisfiability produces exact rational witnesses with denominators at
most dim + 1 for integer-constant zones.

Variables are 0-based internally; the text syntax uses x1..xd.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Iterator, Optional, Sequence, Union

RationalPoint = tuple[Fraction, ...]

__all__ = [
    "Bound",
    "Zone",
    "ZoneDNF",
    "ConstraintParseError",
    "DimensionMismatchError",
    "RationalPoint",
    "bound_add",
    "bound_min",
    "bound_leq",
    "parse_constraint",
    "format_constraint",
    "zone_of",
    "zone_true",
    "zone_empty",
    "canonicalize",
    "zone_conjoin",
    "zone_embed",
    "zone_project",
    "zone_subset",
    "zone_witness",
    "zone_satisfies",
    "zone_pairs",
    "dnf_true",
    "dnf_false",
    "dnf_of_zone",
    "dnf_conjoin",
    "dnf_union",
    "dnf_embed",
    "dnf_project",
    "dnf_canonical",
    "dnf_is_empty",
    "dnf_satisfies",
    "zone_subset_dnf",
    "dnf_subset",
    "satisfiable",
    "span_bound",
    "max_abs_constant",
]


class ConstraintParseError(ValueError):
    """Raised on malformed constraint text; carries a character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DimensionMismatchError(ValueError):
    """Arity disagreement between a point or map and a constraint."""


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bound:
    """Upper bound on a difference: value with strict/non-strict flag."""

    value: Fraction
    strict: bool

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    def key(self) -> tuple[Fraction, int]:
        # (v, strict) is tighter than (v, non-strict)
        return (self.value, 0 if self.strict else 1)

    def __repr__(self) -> str:
        return f"Bound({'<' if self.strict else '<='}{self.value})"


def bound_leq(a: Optional[Bound], b: Optional[Bound]) -> bool:
    """True iff bound a is at least as tight as b (None = unbounded)."""
    if b is None:
        return True
    if a is None:
        return False
    return a.key() <= b.key()


def bound_min(a: Optional[Bound], b: Optional[Bound]) -> Optional[Bound]:
    if a is None:
        return b
    if b is None:
        return a
    return a if a.key() <= b.key() else b


def bound_add(a: Optional[Bound], b: Optional[Bound]) -> Optional[Bound]:
    if a is None or b is None:
        return None
    return Bound(a.value + b.value, a.strict or b.strict)


_ZERO_WEAK = Bound(Fraction(0), False)


# ---------------------------------------------------------------------------
# Zones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Zone:
    """Conjunction of difference bounds on dim variables.

    upper[i][j] bounds x_i - x_j from above; None means unbounded.
    The empty flag is set by canonicalize when the bounds are jointly
    unsatisfiable (the matrix is then all-None and irrelevant).
    """

    dim: int
    upper: tuple[tuple[Optional[Bound], ...], ...]
    empty: bool = False

    def bound(self, i: int, j: int) -> Optional[Bound]:
        return self.upper[i][j]


def zone_true(dim: int) -> Zone:
    row = tuple([None] * dim)
    return Zone(dim, tuple([row] * dim))


def zone_empty(dim: int) -> Zone:
    row = tuple([None] * dim)
    return Zone(dim, tuple([row] * dim), empty=True)


def zone_of(dim: int, bounds: Iterable[tuple[int, int, Bound]]) -> Zone:
    """Build a zone from (i, j, bound) triples, tightest bound winning."""
    mat: list[list[Optional[Bound]]] = [[None] * dim for _ in range(dim)]
    dead = False
    for i, j, b in bounds:
        if not (0 <= i < dim and 0 <= j < dim):
            raise DimensionMismatchError(
                f"coordinate pair ({i},{j}) out of range for dim {dim}")
        if i == j:
            # constant atom: 0 < v or 0 <= v
            if b.strict:
                if not (0 < b.value):
                    dead = True
            else:
                if not (0 <= b.value):
                    dead = True
            continue
        mat[i][j] = bound_min(mat[i][j], b)
    if dead:
        return zone_empty(dim)
    return Zone(dim, tuple(tuple(r) for r in mat))


def zone_pairs(z: Zone) -> Iterator[tuple[int, int, Bound]]:
    for i in range(z.dim):
        for j in range(z.dim):
            b = z.upper[i][j]
            if i != j and b is not None:
                yield i, j, b


def canonicalize(z: Zone) -> Zone:
    """Shortest-path closure; detects emptiness exactly."""
    if z.empty:
        return z
    d = z.dim
    if d <= 1:
        return Zone(d, tuple(tuple([None] * d) for _ in range(d)))
    m: list[list[Optional[Bound]]] = [list(row) for row in z.upper]
    for i in range(d):
        m[i][i] = _ZERO_WEAK
    for k in range(d):
        for i in range(d):
            ik = m[i][k]
            if ik is None:
                continue
            for j in range(d):
                through = bound_add(ik, m[k][j])
                if through is not None and not bound_leq(m[i][j], through):
                    m[i][j] = through
    for i in range(d):
        diag = m[i][i]
        if diag is not None and diag.key() < _ZERO_WEAK.key():
            return zone_empty(d)
        m[i][i] = None
    return Zone(d, tuple(tuple(r) for r in m))


def zone_conjoin(a: Zone, b: Zone) -> Zone:
    """Canonical intersection; emptiness is reflected in the result."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"zone dims {a.dim} != {b.dim}")
    if a.empty or b.empty:
        return zone_empty(a.dim)
    rows = tuple(
        tuple(bound_min(a.upper[i][j], b.upper[i][j]) for j in range(a.dim))
        for i in range(a.dim))
    return canonicalize(Zone(a.dim, rows))


def zone_embed(z: Zone, new_dim: int, posmap: Sequence[int]) -> Zone:
    """Re-index coordinates: old coordinate i becomes posmap[i]."""
    if len(posmap) != z.dim:
        raise DimensionMismatchError("posmap length != zone dim")
    if z.empty:
        return zone_empty(new_dim)
    mat: list[list[Optional[Bound]]] = [[None] * new_dim for _ in range(new_dim)]
    for i, j, b in zone_pairs(z):
        ni, nj = posmap[i], posmap[j]
        mat[ni][nj] = bound_min(mat[ni][nj], b)
    return Zone(new_dim, tuple(tuple(r) for r in mat))


def zone_project(z: Zone, keep: Sequence[int]) -> Zone:
    """Project a *canonical* zone onto the listed coordinates (in order)."""
    if z.empty:
        return zone_empty(len(keep))
    rows = tuple(tuple(z.upper[i][j] if i != j else None for j in keep)
                 for i in keep)
    return Zone(len(keep), rows)


def zone_subset(a: Zone, b: Zone) -> bool:
    """a canonical, b any: every point of a satisfies b's bounds."""
    if a.empty:
        return True
    if b.empty:
        return False
    return all(bound_leq(a.upper[i][j], b.upper[i][j])
               for i in range(a.dim) for j in range(a.dim) if i != j)


def zone_satisfies(z: Zone, point: Sequence[Union[int, Fraction]]) -> bool:
    if z.empty:
        return False
    if len(point) != z.dim:
        raise DimensionMismatchError(
            f"point arity {len(point)} != zone dim {z.dim}")
    for i, j, b in zone_pairs(z):
        diff = Fraction(point[i]) - Fraction(point[j])
        if b.strict:
            if not diff < b.value:
                return False
        else:
            if not diff <= b.value:
                return False
    return True


# ---------------------------------------------------------------------------
# Witness extraction
# ---------------------------------------------------------------------------


def zone_witness(z: Zone) -> Optional[RationalPoint]:
    """Exact witness of a zone, or None.

    For integer-constant zones the witness has denominators <= dim + 1;
    rational constants are handled by scaling through the lcm of the
    denominators.
    """
    zc = canonicalize(z)
    if zc.empty:
        return None
    d = zc.dim
    if d == 0:
        return ()
    den = 1
    for _, _, b in zone_pairs(zc):
        den = lcm(den, b.value.denominator)
    # integer-valued bound matrix for the scaled zone
    val: list[list[Optional[tuple[int, bool]]]] = [[None] * d for _ in range(d)]
    for i, j, b in zone_pairs(zc):
        v = b.value * den
        val[i][j] = (int(v), b.strict)

    # positions are (integer, rank) pairs; ranks are order keys only
    pos_n: list[int] = [0]
    pos_r: list[Fraction] = [Fraction(0)]
    for k in range(1, d):
        lo: Optional[tuple[int, Fraction, bool]] = None
        hi: Optional[tuple[int, Fraction, bool]] = None
        for j in range(k):
            bj = val[j][k]
            if bj is not None:
                v, s = bj
                cand = (pos_n[j] - v, pos_r[j], s)
                if lo is None or (cand[0], cand[1]) > (lo[0], lo[1]) or (
                        (cand[0], cand[1]) == (lo[0], lo[1]) and s and not lo[2]):
                    lo = cand
            bk = val[k][j]
            if bk is not None:
                v, s = bk
                cand = (pos_n[j] + v, pos_r[j], s)
                if hi is None or (cand[0], cand[1]) < (hi[0], hi[1]) or (
                        (cand[0], cand[1]) == (hi[0], hi[1]) and s and not hi[2]):
                    hi = cand
        if lo is None and hi is None:
            n, r = 0, Fraction(0)
        elif lo is None:
            assert hi is not None
            n, r = (hi[0], hi[1]) if not hi[2] else (hi[0] - 1, hi[1])
        elif hi is None:
            n, r = (lo[0], lo[1]) if not lo[2] else (lo[0] + 1, lo[1])
        else:
            lp, hp = (lo[0], lo[1]), (hi[0], hi[1])
            if lp > hp or (lp == hp and (lo[2] or hi[2])):
                raise AssertionError("canonical non-empty zone with empty step")
            if lp == hp or not lo[2]:
                n, r = lp
            elif hi[0] > lo[0]:
                n, r = lo[0], lo[1] + 1
            else:
                n, r = lo[0], (lo[1] + hi[1]) / 2
        pos_n.append(n)
        pos_r.append(r)

    ranks = sorted(set(pos_r))
    frac_of = {r: Fraction(idx, d + 1) for idx, r in enumerate(ranks)}
    point = tuple(Fraction(pos_n[i] + frac_of[pos_r[i]], den) for i in range(d))
    assert zone_satisfies(zc, point)
    return point


# ---------------------------------------------------------------------------
# DNF
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZoneDNF:
    """Finite union of zones of a shared dimension."""

    dim: int
    disjuncts: tuple[Zone, ...]

    def __post_init__(self):
        for z in self.disjuncts:
            if z.dim != self.dim:
                raise DimensionMismatchError(
                    f"disjunct dim {z.dim} != constraint dim {self.dim}")


def dnf_true(dim: int) -> ZoneDNF:
    return ZoneDNF(dim, (zone_true(dim),))


def dnf_false(dim: int) -> ZoneDNF:
    return ZoneDNF(dim, ())


def dnf_of_zone(z: Zone) -> ZoneDNF:
    return ZoneDNF(z.dim, (z,))


def dnf_canonical(c: ZoneDNF) -> ZoneDNF:
    """Canonicalize every disjunct, drop empty ones, dedup."""
    seen: dict[tuple, Zone] = {}
    for z in c.disjuncts:
        zc = canonicalize(z)
        if not zc.empty:
            seen.setdefault(zc.upper, zc)
    return ZoneDNF(c.dim, tuple(seen.values()))


def dnf_conjoin(a: ZoneDNF, b: ZoneDNF) -> ZoneDNF:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"constraint dims {a.dim} != {b.dim}")
    return ZoneDNF(a.dim, tuple(zone_conjoin(x, y)
                                for x in a.disjuncts for y in b.disjuncts))


def dnf_union(a: ZoneDNF, b: ZoneDNF) -> ZoneDNF:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"constraint dims {a.dim} != {b.dim}")
    return ZoneDNF(a.dim, a.disjuncts + b.disjuncts)


def dnf_embed(c: ZoneDNF, new_dim: int, posmap: Sequence[int]) -> ZoneDNF:
    return ZoneDNF(new_dim, tuple(zone_embed(z, new_dim, posmap)
                                  for z in c.disjuncts))


def dnf_project(c: ZoneDNF, keep: Sequence[int]) -> ZoneDNF:
    out = []
    for z in c.disjuncts:
        zc = canonicalize(z)
        if not zc.empty:
            out.append(zone_project(zc, keep))
    return ZoneDNF(len(keep), tuple(out))


def dnf_is_empty(c: ZoneDNF) -> bool:
    return all(canonicalize(z).empty for z in c.disjuncts)


def satisfiable(c: ZoneDNF) -> Optional[RationalPoint]:
    """First-found exact witness of the union, or None."""
    for z in c.disjuncts:
        w = zone_witness(z)
        if w is not None:
            return w
    return None


def dnf_satisfies(c: ZoneDNF, point: Sequence[Union[int, Fraction]]) -> bool:
    return any(zone_satisfies(canonicalize(z), point) for z in c.disjuncts)


def _zone_minus(a: Zone, b: Zone) -> list[Zone]:
    """Difference a \\ b as a list of zones (a canonical non-empty)."""
    if b.empty:
        return [a]
    pieces = []
    for i, j, bb in zone_pairs(b):
        # negate x_i - x_j (strict? < v : <= v)
        neg = Bound(-bb.value, not bb.strict)
        piece = canonicalize(zone_conjoin(a, zone_of(a.dim, [(j, i, neg)])))
        if not piece.empty:
            pieces.append(piece)
    return pieces


def zone_subset_dnf(z: Zone, c: ZoneDNF) -> bool:
    """Inclusion of one zone in a union of zones, decided exactly."""
    zc = canonicalize(z)
    if zc.empty:
        return True
    remainder = [zc]
    for b in c.disjuncts:
        bc = canonicalize(b)
        if bc.empty:
            continue
        nxt: list[Zone] = []
        for r in remainder:
            nxt.extend(_zone_minus(r, bc))
        remainder = nxt
        if not remainder:
            return True
    return not remainder


def dnf_subset(a: ZoneDNF, b: ZoneDNF) -> bool:
    return all(zone_subset_dnf(z, b) for z in a.disjuncts)


# ---------------------------------------------------------------------------
# Span
# ---------------------------------------------------------------------------


def span_bound(c: ZoneDNF) -> Optional[int]:
    """Least integer B bounding max pairwise difference, None if unbounded."""
    best = 0
    for z in c.disjuncts:
        zc = canonicalize(z)
        if zc.empty:
            continue
        if zc.dim <= 1:
            continue
        for i in range(zc.dim):
            for j in range(zc.dim):
                if i == j:
                    continue
                b = zc.upper[i][j]
                if b is None:
                    return None
                v = b.value
                need = -(-v.numerator // v.denominator)  # ceil
                if need > best:
                    best = int(need)
    return best


def max_abs_constant(c: ZoneDNF) -> int:
    """Largest |constant| over all bounds (0 if none); integer zones only."""
    m = 0
    for z in c.disjuncts:
        for _, _, b in zone_pairs(z):
            if b.value.denominator != 1:
                raise ValueError("constraint has a non-integer constant")
            m = max(m, abs(int(b.value)))
    return m


# ---------------------------------------------------------------------------
# Text syntax
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(x\d+|<=|>=|!=|[<>=|&()+-]|\d+)")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ConstraintParseError(f"unexpected character {rest[0]!r}",
                                       pos + (len(text[pos:]) - len(rest)))
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    tokens.append(("<eof>", len(text)))
    return tokens


class _Parser:
    """Recursive descent for  expr := term ('|' term)*,
    term := factor ('&' factor)*, factor := atom | '(' expr ')'."""

    def __init__(self, text: str, dim: int):
        self.tokens = _tokenize(text)
        self.idx = 0
        self.dim = dim

    def peek(self) -> tuple[str, int]:
        return self.tokens[self.idx]

    def take(self) -> tuple[str, int]:
        t = self.tokens[self.idx]
        self.idx += 1
        return t

    def expect(self, kind: str) -> tuple[str, int]:
        tok, pos = self.take()
        if tok != kind:
            raise ConstraintParseError(f"expected {kind!r}, got {tok!r}", pos)
        return tok, pos

    def parse(self):
        node = self.expr()
        tok, pos = self.peek()
        if tok != "<eof>":
            raise ConstraintParseError(f"trailing input {tok!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "|":
            self.take()
            node = ("or", node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "&":
            self.take()
            node = ("and", node, self.factor())
        return node

    def factor(self):
        tok, pos = self.peek()
        if tok == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        return self.atom()

    def _var(self) -> int:
        tok, pos = self.take()
        if not tok.startswith("x"):
            raise ConstraintParseError(f"expected variable, got {tok!r}", pos)
        idx = int(tok[1:])
        if not (1 <= idx <= self.dim):
            raise ConstraintParseError(
                f"variable {tok} out of range 1..{self.dim}", pos)
        return idx - 1

    def _int(self) -> int:
        tok, pos = self.take()
        sign = 1
        if tok == "-":
            sign = -1
            tok, pos = self.take()
        elif tok == "+":
            tok, pos = self.take()
        if not tok.isdigit():
            raise ConstraintParseError(f"expected integer, got {tok!r}", pos)
        return sign * int(tok)

    def atom(self):
        i = self._var()
        self.expect("-")
        j = self._var()
        op, pos = self.take()
        if op not in ("<", "<=", ">", ">=", "=", "!="):
            raise ConstraintParseError(f"expected comparison, got {op!r}", pos)
        k = self._int()
        if op == "=":
            return ("and", ("atom", i, j, "<=", k), ("atom", i, j, ">=", k))
        if op == "!=":
            return ("or", ("atom", i, j, "<", k), ("atom", i, j, ">", k))
        return ("atom", i, j, op, k)


def _ast_to_dnf(node) -> list[list[tuple[int, int, str, int]]]:
    kind = node[0]
    if kind == "atom":
        return [[node[1:]]]
    if kind == "or":
        return _ast_to_dnf(node[1]) + _ast_to_dnf(node[2])
    left = _ast_to_dnf(node[1])
    right = _ast_to_dnf(node[2])
    return [a + b for a in left for b in right]


def _atom_bound(i: int, j: int, op: str, k: int) -> tuple[int, int, Bound]:
    if op == "<":
        return (i, j, Bound(Fraction(k), True))
    if op == "<=":
        return (i, j, Bound(Fraction(k), False))
    if op == ">":
        return (j, i, Bound(Fraction(-k), True))
    assert op == ">="
    return (j, i, Bound(Fraction(-k), False))


def parse_constraint(text: str, dim: int) -> ZoneDNF:
    """Parse the textual constraint syntax into a ZoneDNF.

    Atoms are ``xI - xJ OP K`` with OP one of <, <=, >=, >; = and != are
    sugar; & binds tighter than |; parentheses group.  Variables must lie
    in x1..x{dim}.  Malformed input raises ConstraintParseError with a
    character position.
    """
    if dim < 0:
        raise ValueError("dim must be >= 0")
    stripped = text.strip()
    if not stripped:
        raise ConstraintParseError("empty constraint", 0)
    ast = _Parser(stripped, dim).parse()
    zones = []
    for conj in _ast_to_dnf(ast):
        zones.append(zone_of(dim, [_atom_bound(*a) for a in conj]))
    return ZoneDNF(dim, tuple(zones))


def _format_zone(z: Zone) -> str:
    if z.empty:
        return "x1 - x1 < 0"
    atoms = []
    for i in range(z.dim):
        for j in range(z.dim):
            if i == j:
                continue
            b = z.upper[i][j]
            if b is not None:
                op = "<" if b.strict else "<="
                atoms.append(f"x{i + 1} - x{j + 1} {op} {int(b.value) if b.value.denominator == 1 else b.value}")
    if not atoms:
        return "x1 - x1 <= 0"
    return " & ".join(atoms)


def format_constraint(c: ZoneDNF) -> str:
    """Inverse of parse_constraint up to canonicalization."""
    if c.dim == 0:
        raise ValueError("dim-0 constraints have no textual form")
    if not c.disjuncts:
        return "x1 - x1 < 0"
    parts = [_format_zone(z) for z in c.disjuncts]
    if len(parts) == 1:
        return parts[0]
    return " | ".join(f"({p})" for p in parts)
