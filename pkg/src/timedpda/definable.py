"""Location-indexed definable sets and relations.

A definable set is a finite list of locations, each carrying a dimension
and a constraint; its elements are pairs (label, rational tuple).  A
definable relation maps tuples of location labels to a constraint over
the concatenated coordinates; missing entries denote the empty set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from .constraints import (
    DimensionMismatchError,
    RationalPoint,
    ZoneDNF,
    dnf_canonical,
    dnf_satisfies,
    satisfiable,
    span_bound,
)
from .orbits import (
    TIMELESS,
    MinimalConstraint,
    TimelessMark,
    enumerate_orbits_in_zone,
)

__all__ = [
    "DefinableSet",
    "DefinableRelation",
    "Element",
    "OrbitInfiniteError",
    "is_orbit_finite",
    "orbits",
    "member",
    "product_with_timeless",
]


class OrbitInfiniteError(ValueError):
    """Raised when bounded-span certification fails; names a witness location."""

    def __init__(self, label: str):
        super().__init__(f"location {label!r} has unbounded span")
        self.label = label


@dataclass(frozen=True)
class Element:
    label: str
    point: RationalPoint

    def __post_init__(self):
        object.__setattr__(
            self, "point", tuple(Fraction(v) for v in self.point))


@dataclass(frozen=True)
class DefinableSet:
    """Finite list of (label, dim, constraint) locations; labels unique."""

    locations: tuple[tuple[str, int, ZoneDNF], ...]

    def __post_init__(self):
        labels = [l for l, _, _ in self.locations]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate location labels")
        for l, d, c in self.locations:
            if c.dim != d:
                raise DimensionMismatchError(
                    f"location {l!r}: constraint dim {c.dim} != {d}")

    def labels(self) -> list[str]:
        return [l for l, _, _ in self.locations]

    def get(self, label: str) -> Optional[tuple[int, ZoneDNF]]:
        for l, d, c in self.locations:
            if l == label:
                return (d, c)
        return None

    def dim_of(self, label: str) -> int:
        got = self.get(label)
        if got is None:
            raise KeyError(f"no location {label!r}")
        return got[0]

    def constraint_of(self, label: str) -> ZoneDNF:
        got = self.get(label)
        if got is None:
            raise KeyError(f"no location {label!r}")
        return got[1]

    def is_timeless(self) -> bool:
        return all(d == 0 for _, d, _ in self.locations)


@dataclass(frozen=True)
class DefinableRelation:
    """Arity-k relation: constraints indexed by label tuples."""

    arity: int
    entries: tuple[tuple[tuple[str, ...], ZoneDNF], ...]

    def __post_init__(self):
        for key, _ in self.entries:
            if len(key) != self.arity:
                raise ValueError(
                    f"entry key {key} does not match arity {self.arity}")

    def get(self, key: tuple[str, ...]) -> Optional[ZoneDNF]:
        for k, c in self.entries:
            if k == key:
                return c
        return None


def is_orbit_finite(X: DefinableSet) -> Optional[int]:
    """Uniform span bound (max over locations), or None if unbounded."""
    best = 0
    for label, d, c in X.locations:
        if d == 0:
            continue
        s = span_bound(dnf_canonical(c))
        if s is None:
            return None
        best = max(best, s)
    return best


def orbits(X: DefinableSet
           ) -> list[tuple[str, Union[MinimalConstraint, TimelessMark]]]:
    """Complete duplicate-free orbit enumeration per location.

    Dim-0 locations contribute one TimelessMark when nonempty.  Raises
    OrbitInfiniteError naming the first unbounded location.
    """
    out: list[tuple[str, Union[MinimalConstraint, TimelessMark]]] = []
    for label, d, c in X.locations:
        cc = dnf_canonical(c)
        if d == 0:
            if cc.disjuncts:
                out.append((label, TIMELESS))
            continue
        s = span_bound(cc)
        if s is None:
            raise OrbitInfiniteError(label)
        seen: dict[tuple, MinimalConstraint] = {}
        for z in cc.disjuncts:
            for m in enumerate_orbits_in_zone(z, s):
                seen.setdefault(m.key(), m)
        out.extend((label, seen[k]) for k in sorted(seen))
    return out


def member(X: DefinableSet, e: Element) -> bool:
    """True iff the label exists and the point satisfies its constraint.

    A point of the wrong arity raises DimensionMismatchError rather than
    returning False.
    """
    got = X.get(e.label)
    if got is None:
        return False
    d, c = got
    if len(e.point) != d:
        raise DimensionMismatchError(
            f"point arity {len(e.point)} != dim {d} at {e.label!r}")
    if d == 0:
        return bool(dnf_canonical(c).disjuncts)
    return dnf_satisfies(c, e.point)


def pair_label(a: str, b: str) -> str:
    return f"({a},{b})"


def product_with_timeless(X: DefinableSet, T: DefinableSet) -> DefinableSet:
    """Product with a timeless set: labels become pairs, dims inherited."""
    if not T.is_timeless():
        raise ValueError("second factor must be timeless")
    locs = []
    for xl, d, c in X.locations:
        for tl, _, tc in T.locations:
            if not dnf_canonical(tc).disjuncts:
                continue
            locs.append((pair_label(xl, tl), d, c))
    out = DefinableSet(tuple(locs))
    if is_orbit_finite(X) is not None:
        assert is_orbit_finite(out) is not None
    return out
