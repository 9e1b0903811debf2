"""Orbits of rational tuples under monotone integer-difference-preserving
bijections, and the normal form of definable sets.

An orbit is determined by the integer parts and the weak order of
fractional parts of the differences to an anchor coordinate; that pair
is the canonical encoding (MinimalConstraint).  A definable set splits
into finitely many orbits of bounded span plus K-extensions, where an
extension relaxes the equalities across every gap of size >= K to
one-sided inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Optional, Sequence, Union

import numpy as np

from ._kernels import enumerate_encodings
from .constraints import (
    Bound,
    RationalPoint,
    Zone,
    ZoneDNF,
    bound_leq,
    canonicalize,
    dnf_canonical,
    dnf_project,
    zone_of,
    zone_pairs,
)

__all__ = [
    "MinimalConstraint",
    "NFComponent",
    "TimelessMark",
    "TIMELESS",
    "GapError",
    "orbit_of",
    "eval_over_minimal",
    "orbit_in_zone",
    "admits_gap",
    "k_extension",
    "normal_form",
    "project",
    "enumerate_orbits_in_zone",
]


class GapError(ValueError):
    """Raised when an extension is requested for an orbit without the gap."""


@dataclass(frozen=True)
class TimelessMark:
    """Stand-in for the single element of a dim-0 location."""


TIMELESS = TimelessMark()


@dataclass(frozen=True)
class MinimalConstraint:
    """Canonical encoding of one orbit.

    floors[i] = floor(x_i - x_0); classes[i] = rank of frac(x_i - x_0)
    among the distinct fractional parts (rank 0 = fraction 0, held by
    coordinate 0).  Ranks are contiguous starting at 0.
    """

    dim: int
    floors: tuple[int, ...]
    classes: tuple[int, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("orbits need dim >= 1")
        if len(self.floors) != self.dim or len(self.classes) != self.dim:
            raise ValueError("encoding length mismatch")
        if self.floors[0] != 0 or self.classes[0] != 0:
            raise ValueError("anchor coordinate must sit at (0, class 0)")
        used = set(self.classes)
        if used != set(range(len(used))):
            raise ValueError("classes must be contiguous from 0")

    def key(self) -> tuple:
        return (self.dim, self.floors, self.classes)

    def interval(self, i: int, j: int) -> tuple[int, bool]:
        """Pairwise difference x_i - x_j as (z, is_point):
        Point(z) if same fractional class, else the open unit interval
        (z, z+1)."""
        d = self.floors[i] - self.floors[j]
        ci, cj = self.classes[i], self.classes[j]
        if ci == cj:
            return (d, True)
        if ci > cj:
            return (d, False)
        return (d - 1, False)

    def member_point(self) -> RationalPoint:
        """A concrete member with denominators <= dim + 1."""
        return tuple(
            self.floors[i] + Fraction(self.classes[i], self.dim + 1)
            for i in range(self.dim))

    def to_zone(self) -> Zone:
        """The orbit as a (canonical) zone."""
        bounds = []
        for i in range(self.dim):
            for j in range(self.dim):
                if i == j:
                    continue
                z, pt = self.interval(i, j)
                if pt:
                    bounds.append((i, j, Bound(Fraction(z), False)))
                else:
                    bounds.append((i, j, Bound(Fraction(z + 1), True)))
        return zone_of(self.dim, bounds)


def orbit_of(p: Sequence[Union[int, Fraction]]) -> MinimalConstraint:
    """Canonical encoding of the orbit of a rational point."""
    if len(p) < 1:
        raise ValueError("orbits need dim >= 1")
    pts = [Fraction(x) for x in p]
    base = pts[0]
    floors = []
    fracs = []
    for x in pts:
        diff = x - base
        n = floor(diff)
        floors.append(n)
        fracs.append(diff - n)
    order = {f: i for i, f in enumerate(sorted(set(fracs)))}
    classes = tuple(order[f] for f in fracs)
    return MinimalConstraint(len(pts), tuple(floors), classes)


def _enc_bound(b: Bound) -> int:
    if b.value.denominator != 1:
        raise ValueError("orbit operations need integer constants")
    v = int(b.value)
    return 2 * v - 1 if b.strict else 2 * v


def _interval_code(z: int, pt: bool) -> int:
    return 2 * z if pt else 2 * z + 1


def orbit_in_zone(m: MinimalConstraint, z: Zone) -> bool:
    """True iff the whole orbit satisfies every bound of the zone."""
    if z.empty:
        return False
    if z.dim != m.dim:
        raise ValueError(f"dim mismatch: orbit {m.dim}, zone {z.dim}")
    for i, j, b in zone_pairs(z):
        zz, pt = m.interval(i, j)
        if _interval_code(zz, pt) > _enc_bound(b):
            return False
    return True


def eval_over_minimal(c: ZoneDNF, m: MinimalConstraint) -> bool:
    """True iff the orbit of m is a subset of the set defined by c.

    Every atom has a constant truth value on an orbit, so inclusion in
    the union holds iff inclusion in some disjunct holds.
    """
    if c.dim != m.dim:
        raise ValueError(f"dim mismatch: orbit {m.dim}, constraint {c.dim}")
    return any(orbit_in_zone(m, z) for z in c.disjuncts)


# ---------------------------------------------------------------------------
# Gaps and extensions
# ---------------------------------------------------------------------------


def _position_groups(m: MinimalConstraint) -> list[list[int]]:
    """Coordinates grouped by equal value, ascending."""
    order = sorted(range(m.dim), key=lambda i: (m.floors[i], m.classes[i]))
    groups: list[list[int]] = []
    for i in order:
        if groups and m.interval(i, groups[-1][0]) == (0, True):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def admits_gap(m: MinimalConstraint, g: int
               ) -> Optional[tuple[frozenset[int], frozenset[int]]]:
    """Lowest split L | R with every member realizing a gap >= g, if any.

    A crossing Point(z) realizes the gap z for every member; Open(z)
    realizes member-dependent gaps in (z, z+1).  Either qualifies when
    z >= g.
    """
    if g <= 0:
        raise ValueError("gap must be positive")
    groups = _position_groups(m)
    for t in range(len(groups) - 1):
        z, _pt = m.interval(groups[t + 1][0], groups[t][0])
        if z >= g:
            left = frozenset(i for grp in groups[:t + 1] for i in grp)
            right = frozenset(i for grp in groups[t + 1:] for i in grp)
            return (left, right)
    return None


@dataclass(frozen=True)
class NFComponent:
    """One normal-form component: an orbit, possibly K-extended.

    extended_pairs lists ordered pairs (i, j) whose upper bound on
    x_i - x_j is dropped (the upper side of every qualifying gap shifts
    up, so only the lower bound survives).
    """

    base: MinimalConstraint
    extended_pairs: frozenset[tuple[int, int]]

    @property
    def is_extension(self) -> bool:
        return bool(self.extended_pairs)

    def key(self) -> tuple:
        return (self.base.key(), tuple(sorted(self.extended_pairs)))

    def zone(self) -> Zone:
        z = self.base.to_zone()
        if not self.extended_pairs:
            return z
        mat = [list(row) for row in z.upper]
        for i, j in self.extended_pairs:
            mat[i][j] = None
        return canonicalize(Zone(z.dim, tuple(tuple(r) for r in mat)))


def k_extension(m: MinimalConstraint, K: int) -> NFComponent:
    """Smallest superset of the orbit closed under K-gap extensions.

    Coordinates split into segments at every crossing >= K; all upper
    bounds from a higher segment down to a lower one are dropped.
    """
    if admits_gap(m, K) is None:
        raise GapError(f"orbit admits no gap {K}")
    groups = _position_groups(m)
    seg = {}
    seg_idx = 0
    for t, grp in enumerate(groups):
        if t > 0:
            z, _pt = m.interval(grp[0], groups[t - 1][0])
            if z >= K:
                seg_idx += 1
        for i in grp:
            seg[i] = seg_idx
    pairs = frozenset((i, j) for i in range(m.dim) for j in range(m.dim)
                      if seg[i] > seg[j])
    return NFComponent(m, pairs)


# ---------------------------------------------------------------------------
# Normal form
# ---------------------------------------------------------------------------


def enumerate_orbits_in_zone(z: Zone, span_cap: int,
                             force_python: bool = False
                             ) -> list[MinimalConstraint]:
    """All orbits contained in the zone whose span is <= span_cap."""
    zc = canonicalize(z)
    if zc.empty or span_cap < 0:
        return []
    d = zc.dim
    if d == 0:
        raise ValueError("dim-0 has no orbits")
    cap_code = 2 * span_cap
    M = np.full((d, d), cap_code, dtype=np.int64)
    for i, j, b in zone_pairs(zc):
        M[i, j] = min(cap_code, _enc_bound(b))
    rows = enumerate_encodings(M, force_python=force_python)
    out = []
    for row in rows:
        out.append(MinimalConstraint(
            d, tuple(int(v) for v in row[:d]), tuple(int(v) for v in row[d:])))
    return out


def _zone_subset_simple(a: Zone, b: Zone) -> bool:
    # both canonical; works with None entries
    if a.empty:
        return True
    if b.empty:
        return False
    return all(bound_leq(a.upper[i][j], b.upper[i][j])
               for i in range(a.dim) for j in range(a.dim) if i != j)


def normal_form(c: ZoneDNF) -> list[NFComponent]:
    """Decompose a definable set into orbits of bounded span plus
    K-extensions, K = 1 + largest absolute constant after closure.

    Components subsumed by an emitted extension are pruned; output is
    ordered lexicographically on canonical encodings.
    """
    if c.dim == 0:
        raise ValueError("normal_form needs dim >= 1; dim-0 sets are "
                         "handled by their callers as timeless elements")
    cc = dnf_canonical(c)
    if not cc.disjuncts:
        return []
    if c.dim == 1:
        return [NFComponent(MinimalConstraint(1, (0,), (0,)), frozenset())]

    kmax = 0
    for z in cc.disjuncts:
        for _, _, b in zone_pairs(z):
            if b.value.denominator != 1:
                raise ValueError("normal_form needs integer constants")
            kmax = max(kmax, abs(int(b.value)))
    K = 1 + kmax
    span_cap = (c.dim - 1) * K

    seen: dict[tuple, MinimalConstraint] = {}
    for z in cc.disjuncts:
        for m in enumerate_orbits_in_zone(z, span_cap):
            seen.setdefault(m.key(), m)
    orbits = [seen[k] for k in sorted(seen)]
    for m in orbits:
        assert eval_over_minimal(cc, m)

    ext_by_zone: dict[tuple, NFComponent] = {}
    for m in orbits:
        if admits_gap(m, K) is not None:
            comp = k_extension(m, K)
            zone_key = comp.zone().upper
            prev = ext_by_zone.get(zone_key)
            if prev is None or comp.key() < prev.key():
                ext_by_zone[zone_key] = comp
    exts = sorted(ext_by_zone.values(), key=lambda e: e.key())
    ext_zones = [e.zone() for e in exts]

    kept_exts = []
    for idx, e in enumerate(exts):
        subsumed = any(
            jdx != idx and _zone_subset_simple(ext_zones[idx], ext_zones[jdx])
            and not _zone_subset_simple(ext_zones[jdx], ext_zones[idx])
            for jdx in range(len(exts)))
        if not subsumed:
            kept_exts.append(e)
    kept_zones = [e.zone() for e in kept_exts]

    kept_orbits = [
        NFComponent(m, frozenset()) for m in orbits
        if not any(orbit_in_zone(m, kz) for kz in kept_zones)
    ]

    out = kept_orbits + kept_exts
    out.sort(key=lambda comp: comp.key())
    return out


def project(components: Sequence[NFComponent], keep: Sequence[int]
            ) -> Union[list[NFComponent], list[TimelessMark]]:
    """Coordinate projection of a normal form, re-normalized.

    Projecting onto no coordinates collapses to the timeless singleton
    (one TimelessMark) when the set is nonempty.
    """
    comps = list(components)
    if not comps:
        return []
    dim = comps[0].base.dim
    keep = list(keep)
    if any(not 0 <= i < dim for i in keep):
        raise ValueError("projection coordinates out of range")
    if not keep:
        return [TIMELESS]
    union = ZoneDNF(dim, tuple(comp.zone() for comp in comps))
    return normal_form(dnf_project(union, keep))
