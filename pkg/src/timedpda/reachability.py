"""Emptiness of timed-register pushdown automata.

The decision pipeline discretizes a short-form automaton into finitely
many orbits of reference-pointed state pairs and compiles the
reachability relation into a system of inclusions over sets of integers:

1. ``preprocess`` rewrites the automaton so that every location carries a
   register, there is a single initial and a single final location, and
   every entry is a push or a pop.
2. ``ref_orbits`` enumerates the orbits of pairs of states extended with
   a shared rational reference point.
3. ``build_equations`` emits one set-of-integers variable per such orbit
   and inclusions whose least solution at the initial-final variables is
   exactly the set of integer shifts realized by complete runs.
4. ``decide_emptiness`` solves the system; the automaton accepts some
   word iff some initial-final variable is nonempty.

For automata with a timeless stack the alternative ``untiming_route``
replaces every location by its finitely many orbits and runs an exact
reachability fixpoint on the resulting untimed pushdown automaton;
``trcfg_untiming`` does the same for grammars.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from . import intsets
from .automata import Rule, ShortFormTrPDA, TrCFG, TrPDA, rule_layout, to_short_form, validate
from .constraints import (
    Bound,
    Zone,
    ZoneDNF,
    canonicalize,
    dnf_canonical,
    dnf_conjoin,
    dnf_embed,
    dnf_of_zone,
    dnf_project,
    dnf_true,
    dnf_union,
    max_abs_constant,
    satisfiable,
    span_bound,
    zone_of,
    zone_pairs,
)
from .definable import DefinableRelation, DefinableSet, OrbitInfiniteError, is_orbit_finite, orbits
from .orbits import (
    MinimalConstraint,
    TimelessMark,
    enumerate_orbits_in_zone,
    eval_over_minimal,
    normal_form,
    orbit_of,
)

__all__ = [
    "Emptiness",
    "IntervalZ",
    "RefOrbit",
    "EqVarMap",
    "INITIAL_LABEL",
    "FINAL_LABEL",
    "ref_orbits",
    "shift_image",
    "inverse_image",
    "preprocess",
    "build_equations",
    "decide_emptiness",
    "UntimedRule",
    "UntimedPDA",
    "untiming_pda",
    "untimed_emptiness",
    "untiming_route",
    "CFGProduction",
    "CFG",
    "trcfg_untiming",
    "cfg_nonempty",
]

_ZERO = Bound(Fraction(0), False)
_UNIT_STRICT = Bound(Fraction(1), True)

INITIAL_LABEL = "__init"
FINAL_LABEL = "__fin"
_NOP_SYMBOL = "__dot"


class Emptiness(Enum):
    """Verdict of an emptiness check."""

    EMPTY = "Empty"
    NONEMPTY = "Nonempty"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class IntervalZ:
    """An integer point {m}, open down-set {z < m}, or open up-set {z > m}.

    Closed half-lines are normalized to open ones by moving the endpoint
    outward, so these three shapes are the only constructors.
    """

    kind: str
    m: int

    def __post_init__(self):
        if self.kind not in ("point", "below", "above"):
            raise ValueError(f"unknown interval kind {self.kind!r}")

    def contains(self, z: int) -> bool:
        if self.kind == "below":
            return z < self.m
        if self.kind == "above":
            return z > self.m
        return z == self.m

    def raw_expr(self) -> tuple:
        if self.kind == "point":
            return ("const", self.m)
        return (self.kind, self.m)


def _interval_sum_tag(a: IntervalZ, b: IntervalZ) -> tuple:
    """Pointwise sum of two intervals, as a tag; may cover all of Z."""
    kinds = {a.kind, b.kind}
    if kinds == {"point"}:
        return ("point", a.m + b.m)
    if kinds == {"below"}:
        return ("below", a.m + b.m - 1)
    if kinds == {"above"}:
        return ("above", a.m + b.m + 1)
    if kinds == {"below", "above"}:
        return ("all",)
    pt, half = (a, b) if a.kind == "point" else (b, a)
    return (half.kind, half.m + pt.m)


@dataclass(frozen=True)
class RefOrbit:
    """An orbit of pairs of states extended with a shared reference point.

    A state (label, v) is extended with a rational point t in the window
    min(v) <= t < min(v) + 1; pairs are required to share the point, so
    their span stays below u + 1 whenever every state vector has span at
    most u.  The canonical encoding ``mc`` ranges over the coordinates
    (v, t, v', t') in that order; ``ldim`` is the register count of the
    left state.
    """

    left: str
    right: str
    ldim: int
    mc: MinimalConstraint

    def __post_init__(self):
        if self.ldim < 1 or self.rdim < 1:
            raise ValueError("reference-pointed states need registers")
        if self.mc.interval(self.t_left, self.t_right) != (0, True):
            raise ValueError("reference points of a pair must coincide")

    @property
    def rdim(self) -> int:
        return self.mc.dim - self.ldim - 2

    @property
    def t_left(self) -> int:
        return self.ldim

    @property
    def t_right(self) -> int:
        return self.mc.dim - 1

    def key(self) -> tuple:
        return (self.left, self.right, self.mc.key())

    def is_diagonal(self) -> bool:
        """Same location and the two extended vectors forced equal."""
        if self.left != self.right or self.ldim != self.rdim:
            return False
        off = self.ldim + 1
        return all(self.mc.interval(i, off + i) == (0, True) for i in range(self.ldim))


@dataclass
class EqVarMap:
    """Bookkeeping tying equation variables back to orbits.

    ``orbit_of_var`` maps each X variable to its pair orbit and ``var_of``
    inverts it (keyed by ``RefOrbit.key()``); ``initial_final`` lists the
    variables whose orbit pairs the unique initial location with the
    unique final one; ``interval_vars`` records the shared integer
    interval variables by tag.
    """

    var_of: dict
    orbit_of_var: dict
    initial_final: tuple
    interval_vars: dict

    def var(self, o: RefOrbit) -> str:
        return self.var_of[o.key()]


def _sat(c: ZoneDNF) -> bool:
    # satisfiable() yields a witness point; the dim-0 witness is () and
    # must still count as a yes
    return satisfiable(c) is not None


def _equal_dnf(dim: int, pairs: Sequence[tuple[int, int]]) -> ZoneDNF:
    rows = []
    for i, j in pairs:
        rows.append((i, j, _ZERO))
        rows.append((j, i, _ZERO))
    return dnf_of_zone(zone_of(dim, rows))


def _sig_groups(Q: DefinableSet, labels: Sequence[str]) -> tuple[list, dict]:
    """Group locations sharing (register count, constraint).

    Orbit enumeration only depends on that signature, so chains over
    label tuples are computed once per signature tuple and reused.
    """
    ids: dict = {}
    sigs: list = []
    of_label: dict = {}
    for l in labels:
        s = (Q.dim_of(l), Q.constraint_of(l))
        if s not in ids:
            ids[s] = len(sigs)
            sigs.append(s)
        of_label[l] = ids[s]
    return sigs, of_label


def _chain_dnf(parts: Sequence[tuple[int, ZoneDNF]]) -> tuple[ZoneDNF, tuple[tuple[int, int], ...]]:
    """Constraint of reference-pointed tuples, one block per part.

    The layout concatenates (v_i, t_i) per part and ties all the
    reference points equal; each t_i is constrained to the window
    min(v_i) <= t_i < min(v_i) + 1.  Returns the constraint (canonical
    disjuncts) and the (offset, register count) of every block.
    """
    if any(d == 0 for d, _ in parts):
        raise ValueError("reference points need timed states; run preprocess first")
    offs = []
    at = 0
    for d, _ in parts:
        offs.append((at, d))
        at += d + 1
    total = at
    base_rows = []
    for (o1, d1), (o2, d2) in zip(offs, offs[1:]):
        base_rows.append((o1 + d1, o2 + d2, _ZERO))
        base_rows.append((o2 + d2, o1 + d1, _ZERO))
    window_cases = []
    constraint_cases = []
    for (off, d), (_, c) in zip(offs, parts):
        t = off + d
        window_cases.append([
            [(off + i, t, _ZERO)] + [(t, off + j, _UNIT_STRICT) for j in range(d)]
            for i in range(d)
        ])
        constraint_cases.append([
            [(off + i, off + j, b) for i, j, b in zone_pairs(z)]
            for z in dnf_canonical(c).disjuncts
        ])
    zones = []
    for pick in itertools.product(*window_cases, *constraint_cases):
        rows = list(base_rows)
        for part_rows in pick:
            rows.extend(part_rows)
        z = canonicalize(zone_of(total, rows))
        if not z.empty:
            zones.append(z)
    return ZoneDNF(total, tuple(zones)), tuple(offs)


def _orbits_in_dnf(dnf: ZoneDNF, span_cap: int) -> list[MinimalConstraint]:
    seen = {}
    for z in dnf.disjuncts:
        for m in enumerate_orbits_in_zone(z, span_cap):
            seen.setdefault(m.key(), m)
    return [seen[k] for k in sorted(seen)]


def _mc_restrict(m: MinimalConstraint, coords: Sequence[int]) -> MinimalConstraint:
    """Orbit of a subtuple, computed directly on the encoding.

    The new anchor is coords[0]; fractional ranks rotate around the old
    anchor's rank, and floors drop by one where the rotation wraps.
    """
    r0 = m.classes[coords[0]]
    f0 = m.floors[coords[0]]
    keys = []
    floors = []
    for c in coords:
        r = m.classes[c]
        if r == r0:
            keys.append((0, 0))
            floors.append(m.floors[c] - f0)
        elif r > r0:
            keys.append((1, r))
            floors.append(m.floors[c] - f0)
        else:
            keys.append((2, r))
            floors.append(m.floors[c] - f0 - 1)
    order = {k: i for i, k in enumerate(sorted(set(keys)))}
    return MinimalConstraint(len(coords), tuple(floors), tuple(order[k] for k in keys))


def _state_span(Q: DefinableSet) -> int:
    u = is_orbit_finite(Q)
    if u is None:
        for label, d, c in Q.locations:
            if d and span_bound(dnf_canonical(c)) is None:
                raise OrbitInfiniteError(
                    f"location {label!r} has unbounded register span; "
                    f"emptiness is only decided on the orbit-finite class"
                )
        raise OrbitInfiniteError("state set is not orbit-finite")
    return u


def ref_orbits(Q: DefinableSet) -> list[RefOrbit]:
    """All orbits of reference-pointed state pairs with a shared point.

    Requires every inhabited location of Q to carry a register (run
    ``preprocess`` first) and Q to be orbit-finite with some span bound
    u; the resulting pair orbits then have span at most u + 1 and there
    are finitely many of them.
    """
    u = _state_span(Q)
    for label, d, c in Q.locations:
        if d == 0 and dnf_canonical(c).disjuncts:
            raise ValueError(
                f"location {label!r} has no registers; reference points need "
                f"timed states (preprocess adds placeholder registers)"
            )
    labels = [l for l, d, _ in Q.locations if d]
    sigs, sid = _sig_groups(Q, labels)
    cache: dict = {}
    out = []
    for l1 in labels:
        for l2 in labels:
            k = (sid[l1], sid[l2])
            if k not in cache:
                dnf, offs = _chain_dnf((sigs[k[0]], sigs[k[1]]))
                cache[k] = (offs[0][1], _orbits_in_dnf(dnf, u + 1))
            ldim, mcs = cache[k]
            out.extend(RefOrbit(l1, l2, ldim, m) for m in mcs)
    return out


def shift_image(o: RefOrbit, z: int) -> MinimalConstraint:
    """Orbit of plain state pairs obtained by dropping the shared
    reference point and shifting every register of the right state by z.

    Shifting by an integer commutes with order automorphisms, so the
    image of an orbit is again a single orbit; on the encoding it adds z
    to the floors of the right block.
    """
    coords = list(range(o.ldim)) + list(range(o.ldim + 1, o.mc.dim - 1))
    base = _mc_restrict(o.mc, coords)
    floors = tuple(f + z if i >= o.ldim else f for i, f in enumerate(base.floors))
    return MinimalConstraint(base.dim, floors, base.classes)


def inverse_image(
    X: DefinableRelation, refOrbits: Sequence[RefOrbit]
) -> list[tuple[RefOrbit, IntervalZ]]:
    """Decompose {(o, z) : shift_image(o, z) lies inside X} into pieces.

    X is an arity-2 relation keyed by (left, right) location labels with
    constraints over the concatenated registers.  For each orbit the set
    of admissible shifts is a finite union of points and open half-lines:
    beyond a threshold depending on the largest constant of X and the
    orbit span, membership of the image no longer changes with the
    shift, so each tail is tested once and the finite middle is scanned
    pointwise.  Pieces are listed per orbit in increasing order.
    """
    if X.arity != 2:
        raise ValueError(f"inverse_image needs an arity-2 relation, got arity {X.arity}")
    out = []
    for o in refOrbits:
        c = X.get((o.left, o.right))
        if c is None:
            continue
        cc = dnf_canonical(c)
        if not cc.disjuncts:
            continue
        if cc.dim != o.ldim + o.rdim:
            raise ValueError(
                f"constraint for ({o.left!r}, {o.right!r}) has dimension "
                f"{cc.dim}, expected {o.ldim + o.rdim}"
            )
        span = 0
        for i in range(o.mc.dim):
            for j in range(o.mc.dim):
                if i != j:
                    d, pt = o.mc.interval(i, j)
                    span = max(span, d if pt else d + 1)
        mstar = max_abs_constant(cc) + span + 4
        cache: dict[int, bool] = {}

        def included(z: int) -> bool:
            if z not in cache:
                cache[z] = eval_over_minimal(cc, shift_image(o, z))
            return cache[z]

        below_ray = included(-mstar - 1)
        above_ray = included(mstar + 1)
        # beyond the threshold membership is constant along each tail
        assert below_ray == included(-mstar)
        assert above_ray == included(mstar)
        pieces = []
        lo, hi = -mstar, mstar
        if below_ray:
            m = lo
            while m <= hi and included(m):
                m += 1
            pieces.append(IntervalZ("below", m))
            lo = m
        tail = []
        if above_ray:
            m2 = hi
            while m2 >= lo and included(m2):
                m2 -= 1
            tail.append(IntervalZ("above", m2))
            hi = m2
        pieces.extend(IntervalZ("point", z) for z in range(lo, hi + 1) if included(z))
        pieces.extend(tail)
        out.extend((o, piece) for piece in pieces)
    return out


def _is_orbitish_zone(z: Zone) -> bool:
    """Whether every pairwise difference is an integer point, an open unit
    interval, or a half-line obtained by dropping one side of such a
    bound; such zones are left alone by normal-forming."""
    for i in range(z.dim):
        for j in range(i + 1, z.dim):
            up, lo = z.upper[i][j], z.upper[j][i]
            if up is None and lo is None:
                return False
            if up is None or lo is None:
                b = up if up is not None else lo
                if b.value.denominator != 1:
                    return False
                continue
            if up.value.denominator != 1 or lo.value.denominator != 1:
                return False
            s = up.value + lo.value
            if not ((s == 0 and not up.strict and not lo.strict) or (s == 1 and up.strict and lo.strict)):
                return False
    return True


def _normal_form_dnf(c: ZoneDNF) -> ZoneDNF:
    cc = dnf_canonical(c)
    if cc.dim == 0 or not cc.disjuncts:
        return cc
    if all(_is_orbitish_zone(z) for z in cc.disjuncts):
        return cc
    return dnf_canonical(ZoneDNF(cc.dim, tuple(comp.zone() for comp in normal_form(cc))))


def preprocess(a: ShortFormTrPDA) -> ShortFormTrPDA:
    """Rewrite a short-form automaton for the equation construction.

    The result accepts the same language restricted to the empty word
    question: it has a single initial location ``__init`` and a single
    final location ``__fin``, the final location silently pops every
    stack symbol, every state-to-state entry is replaced by a push/pop
    handshake over a dedicated timeless symbol, every location carries
    at least one register (a placeholder register is added where needed,
    tied to the first register of the paired stack symbol when that
    symbol is timed), input letters are projected away, and every entry
    constraint is brought to normal form.  Applying it twice gives the
    same automaton.  Fresh labels start with two underscores; colliding
    user labels are rejected.
    """
    return _preprocess(a, normal_rules=True)


def _preprocess(a: ShortFormTrPDA, normal_rules: bool) -> ShortFormTrPDA:
    # the equation construction only performs semantic operations on rule
    # constraints, so the internal pipeline skips the normal-form rewrite
    # (which can multiply disjunct counts) and still compiles the same
    # system; the public entry point keeps the normal-form guarantee
    state_locs: dict[str, tuple[int, ZoneDNF]] = {l: (d, c) for l, d, c in a.states.locations}
    stack_locs: list[tuple[int, int, ZoneDNF]] = list(a.stackAlphabet.locations)
    stack_labels = {l for l, _, _ in stack_locs}
    push_entries = [(tuple(k), c) for k, c in a.push.entries]
    pop_entries = [(tuple(k), c) for k, c in a.pop.entries]
    nop_entries = [(tuple(k), c) for k, c in a.nop.entries]

    def input_dim(lbl: Optional[str]) -> int:
        return a.inputAlphabet.dim_of(lbl) if lbl is not None else 0

    def reserve(label: str) -> None:
        if label in state_locs:
            raise ValueError(f"state label {label!r} is reserved for preprocessing")

    # Unique artificial initial location entered nowhere and left by a
    # silent move into each declared initial state.
    ini = a.initial.locations
    if not (len(ini) == 1 and ini[0][0] == INITIAL_LABEL):
        reserve(INITIAL_LABEL)
        state_locs[INITIAL_LABEL] = (0, dnf_true(0))
        for l, _, c in ini:
            nop_entries.append(((INITIAL_LABEL, None, l), c))

    # Unique artificial final location that can empty the stack silently.
    fin = a.final.locations
    if not (len(fin) == 1 and fin[0][0] == FINAL_LABEL):
        reserve(FINAL_LABEL)
        state_locs[FINAL_LABEL] = (0, dnf_true(0))
        for l, _, c in fin:
            nop_entries.append(((l, None, FINAL_LABEL), c))
        for sl, sd, _ in stack_locs:
            pop_entries.append(((FINAL_LABEL, sl, None, FINAL_LABEL), dnf_true(sd)))

    # Replace every state-to-state entry by a push/pop handshake over a
    # dedicated timeless symbol so that each step moves the stack.
    if nop_entries:
        if _NOP_SYMBOL in stack_labels:
            raise ValueError(f"stack label {_NOP_SYMBOL!r} is reserved for preprocessing")
        stack_locs.append((_NOP_SYMBOL, 0, dnf_true(0)))
        stack_labels.add(_NOP_SYMBOL)
        pop_entries.append(((FINAL_LABEL, _NOP_SYMBOL, None, FINAL_LABEL), dnf_true(0)))
        aux_at = 0
        for (q, aa, q2), c in nop_entries:
            dq = state_locs[q][0]
            da = input_dim(aa)
            d2 = state_locs[q2][0]
            while f"__n{aux_at}" in state_locs:
                aux_at += 1
            aux = f"__n{aux_at}"
            aux_at += 1
            target = list(range(dq + da, dq + da + d2))
            state_locs[aux] = (d2, dnf_conjoin(dnf_project(c, target), state_locs[q2][1]))
            push_entries.append(((q, aa, aux, _NOP_SYMBOL), c))
            pop_entries.append(
                ((aux, _NOP_SYMBOL, None, q2), _equal_dnf(2 * d2, [(j, d2 + j) for j in range(d2)]))
            )
        nop_entries = []

    # Project input letters away and merge entries that collide.
    sdims = {l: d for l, d, _ in stack_locs}

    def merged(entries):
        acc: dict[tuple, ZoneDNF] = {}
        order = []
        for k, c in entries:
            if k in acc:
                acc[k] = dnf_union(acc[k], c)
            else:
                acc[k] = c
                order.append(k)
        return [(k, acc[k]) for k in order]

    unlabeled_push = []
    for (q, aa, q2, s), c in push_entries:
        if aa is None:
            unlabeled_push.append(((q, None, q2, s), c))
            continue
        dq, da = state_locs[q][0], input_dim(aa)
        d2, ds = state_locs[q2][0], sdims[s]
        keep = list(range(dq)) + list(range(dq + da, dq + da + d2 + ds))
        unlabeled_push.append(((q, None, q2, s), dnf_project(c, keep)))
    unlabeled_pop = []
    for (q, s, aa, q2), c in pop_entries:
        if aa is None:
            unlabeled_pop.append(((q, s, None, q2), c))
            continue
        dq, ds = state_locs[q][0], sdims[s]
        da, d2 = input_dim(aa), state_locs[q2][0]
        keep = list(range(dq + ds)) + list(range(dq + ds + da, dq + ds + da + d2))
        unlabeled_pop.append(((q, s, None, q2), dnf_project(c, keep)))
    push_entries = merged(unlabeled_push)
    pop_entries = merged(unlabeled_pop)

    # Give every location a register.  A placeholder register is left
    # unconstrained unless the entry pairs it with a timed stack symbol,
    # in which case it is tied to that symbol's first register so the
    # handshake stays exact.
    dummies = {l for l, (d, _) in state_locs.items() if d == 0}
    for l in dummies:
        _, c = state_locs[l]
        inhabited = bool(dnf_canonical(c).disjuncts)
        state_locs[l] = (1, dnf_true(1) if inhabited else ZoneDNF(1, ()))

    def reembed(c: ZoneDNF, blocks: Sequence[tuple[int, int]], ties: Sequence[tuple[int, int]]) -> ZoneDNF:
        # blocks: (old register count, new register count) per segment
        total = sum(nd for _, nd in blocks)
        posmap = []
        at = 0
        for od, nd in blocks:
            posmap.extend(range(at, at + od))
            at += nd
        out = dnf_embed(c, total, posmap)
        if ties:
            out = dnf_conjoin(out, _equal_dnf(total, ties))
        return out

    if dummies:
        rebuilt_push = []
        for (q, _, q2, s), c in push_entries:
            oq = 1 if q in dummies else 0
            oq2 = 1 if q2 in dummies else 0
            dq, d2, ds = state_locs[q][0], state_locs[q2][0], sdims[s]
            blocks = [(dq - oq, dq), (d2 - oq2, d2), (ds, ds)]
            ties = [(dq, dq + d2)] if (oq2 and ds) else []
            rebuilt_push.append(((q, None, q2, s), reembed(c, blocks, ties)))
        rebuilt_pop = []
        for (q, s, _, q2), c in pop_entries:
            oq = 1 if q in dummies else 0
            oq2 = 1 if q2 in dummies else 0
            dq, ds, d2 = state_locs[q][0], sdims[s], state_locs[q2][0]
            blocks = [(dq - oq, dq), (ds, ds), (d2 - oq2, d2)]
            ties = [(0, dq)] if (oq and ds) else []
            rebuilt_pop.append(((q, s, None, q2), reembed(c, blocks, ties)))
        push_entries = rebuilt_push
        pop_entries = rebuilt_pop

    if normal_rules:
        push_entries = [(k, _normal_form_dnf(c)) for k, c in push_entries]
        pop_entries = [(k, _normal_form_dnf(c)) for k, c in pop_entries]

    states = DefinableSet(tuple((l, d, c) for l, (d, c) in state_locs.items()))
    d_ini = state_locs[INITIAL_LABEL][0]
    d_fin = state_locs[FINAL_LABEL][0]
    return ShortFormTrPDA(
        states=states,
        inputAlphabet=a.inputAlphabet,
        stackAlphabet=DefinableSet(tuple(stack_locs)),
        initial=DefinableSet(((INITIAL_LABEL, d_ini, dnf_true(d_ini)),)),
        final=DefinableSet(((FINAL_LABEL, d_fin, dnf_true(d_fin)),)),
        push=DefinableRelation(4, tuple(push_entries)),
        pop=DefinableRelation(4, tuple(pop_entries)),
        nop=DefinableRelation(3, ()),
    )


def build_equations(a: ShortFormTrPDA) -> tuple[intsets.EqSystem, EqVarMap]:
    """Compile a preprocessed automaton into inclusions over sets of
    integers whose least solution decides emptiness.

    One variable X_o is introduced per orbit o of reference-pointed
    state pairs; its least value is the set of integer shifts z such
    that some run takes a state in the left component to the shifted
    right component with equal stack at both ends.  Four inclusion
    families generate the least such relation: zero at diagonal orbits,
    composition of adjacent pairs, a push/pop handshake over each
    timeless stack symbol, and a push/pop handshake over each timed
    stack symbol routed through an intersection with {0}.  When the
    whole stack alphabet is timeless the system is intersection-free.
    """
    if a.nop.entries:
        raise ValueError("equation construction expects preprocessed input with no state-to-state entries")
    if len(a.initial.locations) != 1 or len(a.final.locations) != 1:
        raise ValueError("equation construction expects unique initial and final locations; run preprocess")
    Q = a.states
    u = _state_span(Q)
    refs = ref_orbits(Q)
    var_of = {}
    orbit_of_var = {}
    for i, o in enumerate(refs):
        name = f"X{i}"
        var_of[o.key()] = name
        orbit_of_var[name] = o

    raw: list[tuple[str, tuple]] = []
    seen_raw = set()

    def emit(target: str, expr: tuple) -> None:
        if (target, expr) not in seen_raw:
            seen_raw.add((target, expr))
            raw.append((target, expr))

    interval_vars: dict[tuple, str] = {}

    def z_var(tag: tuple) -> str:
        if tag in interval_vars:
            return interval_vars[tag]
        if tag[0] == "all":
            name = "Z_all"
            step = "Z_all_step"
            emit(name, ("const", 0))
            emit(step, ("const", 1))
            emit(step, ("const", -1))
            emit(name, ("add", ("var", step), ("var", name)))
        else:
            kind, m = tag
            word = {"point": "eq", "below": "lt", "above": "gt"}[kind]
            name = f"Z_{word}_{str(m).replace('-', 'm')}"
            emit(name, IntervalZ(kind, m).raw_expr())
        interval_vars[tag] = name
        return name

    cap_vars: dict[tuple, str] = {}

    def cap_var(expr: tuple) -> str:
        # one shared "intersect with {0}" variable per distinct argument
        name = cap_vars.get(expr)
        if name is None:
            name = f"C{len(cap_vars)}"
            cap_vars[expr] = name
            emit(name, ("inter0", expr))
        return name

    # diagonal orbits admit the empty run
    for o in refs:
        if o.is_diagonal():
            emit(var_of[o.key()], ("const", 0))

    # composition: runs through a middle state with the same reference point
    labels = [l for l, d, _ in Q.locations if d]
    sigs, sid = _sig_groups(Q, labels)
    pairs_present = {(o.left, o.right) for o in refs}
    triple_cache: dict = {}
    for l1, l2, l3 in itertools.product(labels, repeat=3):
        if not ((l1, l2) in pairs_present and (l2, l3) in pairs_present and (l1, l3) in pairs_present):
            continue
        tk = (sid[l1], sid[l2], sid[l3])
        if tk not in triple_cache:
            dnf, offs = _chain_dnf(tuple(sigs[i] for i in tk))
            (o1, d1), (o2, d2), (o3, d3) = offs
            c12 = list(range(o1, o1 + d1 + 1)) + list(range(o2, o2 + d2 + 1))
            c23 = list(range(o2, o2 + d2 + 1)) + list(range(o3, o3 + d3 + 1))
            c13 = list(range(o1, o1 + d1 + 1)) + list(range(o3, o3 + d3 + 1))
            triple_cache[tk] = [
                (_mc_restrict(m, c12).key(), _mc_restrict(m, c23).key(), _mc_restrict(m, c13).key())
                for m in _orbits_in_dnf(dnf, u + 1)
            ]
        for k12, k23, k13 in triple_cache[tk]:
            emit(var_of[(l1, l3, k13)],
                 ("add", ("var", var_of[(l1, l2, k12)]), ("var", var_of[(l2, l3, k23)])))

    inhabited_stack = [
        (l, d) for l, d, c in a.stackAlphabet.locations if dnf_canonical(c).disjuncts
    ]
    timeless_syms = [l for l, d in inhabited_stack if d == 0]
    timed_syms = {l: d for l, d in inhabited_stack if d}

    def entry_rel(entries, sym, key_of, layout_of):
        acc: dict[tuple, ZoneDNF] = {}
        order = []
        for k, c in entries:
            if layout_of(k) != sym:
                continue
            kk = key_of(k)
            if kk in acc:
                acc[kk] = dnf_union(acc[kk], c)
            else:
                acc[kk] = c
                order.append(kk)
        return DefinableRelation(2, tuple((k, acc[k]) for k in order))

    # push/pop handshake over a timeless symbol: the inner run is framed
    # by a push and a pop whose admissible shifts add up
    quad_cache: dict[tuple, list] = {}
    for sym in timeless_syms:
        push_rel = entry_rel(a.push.entries, sym, lambda k: (k[0], k[2]), lambda k: k[3])
        pop_rel = entry_rel(a.pop.entries, sym, lambda k: (k[0], k[3]), lambda k: k[1])
        if not push_rel.entries or not pop_rel.entries:
            continue
        d_push = inverse_image(push_rel, refs)
        d_pop = inverse_image(pop_rel, refs)
        for o12, piece1 in d_push:
            for o34, piece2 in d_pop:
                zv = z_var(_interval_sum_tag(piece1, piece2))
                ck = (o12.mc.key(), o12.ldim, o34.mc.key(), o34.ldim)
                if ck not in quad_cache:
                    d1, d2 = o12.ldim, o12.rdim
                    d3, d4 = o34.ldim, o34.rdim
                    total = d1 + d2 + d3 + d4 + 4
                    half = d1 + d2 + 2
                    t2 = d1 + 1 + d2
                    t3 = half + d3
                    rows = [(t2, t3, _ZERO), (t3, t2, _ZERO)]
                    rows += list(zone_pairs(o12.mc.to_zone()))
                    rows += [(i + half, j + half, b) for i, j, b in zone_pairs(o34.mc.to_zone())]
                    z8 = canonicalize(zone_of(total, rows))
                    v2 = list(range(d1 + 1, d1 + 1 + d2)) + [t2]
                    v3 = list(range(half, half + d3)) + [t3]
                    v1 = list(range(0, d1 + 1))
                    v4 = list(range(half + d3 + 1, total))
                    quad_cache[ck] = [] if z8.empty else [
                        (_mc_restrict(m, v2 + v3).key(), _mc_restrict(m, v1 + v4).key())
                        for m in _orbits_in_dnf(ZoneDNF(total, (z8,)), u + 1)
                    ]
                for k23, k14 in quad_cache[ck]:
                    emit(var_of[(o12.left, o34.right, k14)],
                         ("add", ("var", var_of[(o12.right, o34.left, k23)]), ("var", zv)))

    # push/pop handshake over a timed symbol: the popped registers carry
    # information across the inner run, so the middle pair is pinned by
    # an intersection with {0} after undoing its shift
    middles: dict[tuple, ZoneDNF] = {}
    middle_pairs: dict[tuple, list] = {}
    for (q, _, qb, s), cpu in a.push.entries:
        if s not in timed_syms:
            continue
        for (qbp, s2, _, q2), cpo in a.pop.entries:
            if s2 != s:
                continue
            dq, dqb = Q.dim_of(q), Q.dim_of(qb)
            dqbp, dq2 = Q.dim_of(qbp), Q.dim_of(q2)
            ds = timed_syms[s]
            total = dq + dqb + dqbp + dq2 + ds
            s_off = dq + dqb + dqbp + dq2
            joint = dnf_conjoin(
                dnf_embed(cpu, total, list(range(0, dq + dqb)) + list(range(s_off, total))),
                dnf_embed(
                    cpo,
                    total,
                    list(range(dq + dqb, dq + dqb + dqbp))
                    + list(range(s_off, total))
                    + list(range(dq + dqb + dqbp, dq + dqb + dqbp + dq2)),
                ),
            )
            if not dnf_canonical(joint).disjuncts:
                continue
            key = (qb, qbp, s)
            mid = dnf_project(joint, list(range(dq, dq + dqb + dqbp)) + list(range(s_off, total)))
            middles[key] = dnf_union(middles[key], mid) if key in middles else mid
            middle_pairs.setdefault(key, []).append((q, q2, joint, total, dq, dq2))
    for key, mid in middles.items():
        qb, qbp, s = key
        cc = dnf_canonical(mid)
        mid_span = span_bound(cc)
        if mid_span is None:
            raise OrbitInfiniteError(
                f"push/pop pairs over timed symbol {s!r} relate {qb!r} and {qbp!r} "
                f"with unbounded span; emptiness is only decided when these "
                f"projections are orbit-finite"
            )
        dqb, dqbp = Q.dim_of(qb), Q.dim_of(qbp)
        ds = timed_syms[s]
        for O in _orbits_in_dnf(cc, mid_span):
            x_o: dict[tuple, ZoneDNF] = {}
            order = []
            for q, q2, joint, total, dq, dq2 in middle_pairs[key]:
                s_off = dq + dqb + dqbp + dq2
                pinned = dnf_conjoin(
                    joint,
                    dnf_embed(
                        dnf_of_zone(O.to_zone()),
                        total,
                        list(range(dq, dq + dqb + dqbp)) + list(range(s_off, total)),
                    ),
                )
                outer = dnf_project(pinned, list(range(0, dq)) + list(range(dq + dqb + dqbp, s_off)))
                if not dnf_canonical(outer).disjuncts:
                    continue
                kk = (q, q2)
                if kk in x_o:
                    x_o[kk] = dnf_union(x_o[kk], outer)
                else:
                    x_o[kk] = outer
                    order.append(kk)
            if not order:
                continue
            O12 = _mc_restrict(O, range(dqb + dqbp))
            inner_rel = DefinableRelation(2, (((qb, qbp), dnf_of_zone(O12.to_zone())),))
            outer_rel = DefinableRelation(2, tuple((k, x_o[k]) for k in order))
            for obar, piece in inverse_image(inner_rel, refs):
                # a timed symbol pins the reference points, so only
                # isolated shifts can reproduce the popped registers
                assert piece.kind == "point", "timed handshake middle must decompose into points"
                cap = cap_var(("add", ("var", var_of[obar.key()]), ("const", -piece.m)))
                for o, piece_out in inverse_image(outer_rel, refs):
                    emit(var_of[o.key()], ("add", ("var", cap), ("var", z_var((piece_out.kind, piece_out.m)))))

    ini_label = a.initial.locations[0][0]
    fin_label = a.final.locations[0][0]
    initial_final = tuple(
        var_of[o.key()] for o in refs if o.left == ini_label and o.right == fin_label
    )
    system = intsets.normalize(raw, variables=[f"X{i}" for i in range(len(refs))])
    if not timed_syms:
        assert not any(isinstance(inc, intsets.Inter) for inc in system.inclusions)
    return system, EqVarMap(
        var_of=var_of,
        orbit_of_var=orbit_of_var,
        initial_final=initial_final,
        interval_vars=interval_vars,
    )


def decide_emptiness(a: TrPDA, *, budget: int = 10_000, depth: int = 12) -> Emptiness:
    """Decide language emptiness through the equation pipeline.

    Raises OrbitInfiniteError outside the orbit-finite class (where the
    question is undecidable in general; ``bounded_empty_oracle`` still
    searches short runs).  The answer is exact whenever the solver
    returns a definite verdict; enlarging budget and depth shrinks the
    Unknown region for systems with intersections.
    """
    rep = validate(a)
    if not rep.orbit_finite_class:
        detail = "; ".join(rep.failures + rep.rule_errors)
        raise OrbitInfiniteError(
            "emptiness is only decided on the orbit-finite class"
            + (f" ({detail})" if detail else "")
            + "; bounded_empty_oracle can still search bounded runs"
        )
    system, vm = build_equations(_preprocess(to_short_form(a), normal_rules=False))
    # a solver pass must be able to touch every compiled inclusion at
    # least a few times, so the step budget scales with the system
    budget = max(budget, 4 * len(system.inclusions) + 100)
    saw_unknown = False
    for v in vm.initial_final:
        verdict = intsets.nonempty(system, v, budget=budget, depth=depth)
        if verdict == intsets.TRUE:
            return Emptiness.NONEMPTY
        if verdict == intsets.UNKNOWN:
            saw_unknown = True
    return Emptiness.UNKNOWN if saw_unknown else Emptiness.EMPTY


@dataclass(frozen=True)
class UntimedRule:
    frm: str
    pops: tuple[str, ...]
    letter: Optional[str]
    to: str
    pushes: tuple[str, ...]


@dataclass(frozen=True)
class UntimedPDA:
    """Plain pushdown automaton over orbit identifiers."""

    states: tuple[str, ...]
    stack: tuple[str, ...]
    initial: tuple[str, ...]
    final: tuple[str, ...]
    rules: tuple[UntimedRule, ...]


def _orbit_ids(X: DefinableSet) -> dict[str, list[tuple[str, Optional[MinimalConstraint]]]]:
    """Orbits per location as (identifier, encoding) with stable ids."""
    per: dict[str, list] = {l: [] for l, _, _ in X.locations}
    for label, enc in orbits(X):
        if isinstance(enc, TimelessMark):
            per[label].append((f"{label}#T", None))
        else:
            per[label].append((enc.key(), enc))
    out = {}
    for label, items in per.items():
        named = []
        for idx, item in enumerate(sorted(items, key=lambda kv: repr(kv[0]))):
            _, enc = item
            named.append((f"{label}#T" if enc is None else f"{label}#{idx}", enc))
        out[label] = named
    return out


def untiming_pda(a: TrPDA) -> UntimedPDA:
    """Replace every location of a timeless-stack automaton by its orbits.

    Each state orbit and each input-letter orbit becomes one untimed
    identifier; a rule survives for a tuple of orbits iff its constraint
    is satisfiable on them.  The untimed automaton has the same
    reachability structure, so emptiness and untimed membership agree
    with the original.
    """
    rep = validate(a)
    if not rep.timeless_stack:
        raise ValueError("untiming needs a timeless stack; use the equation pipeline instead")
    state_orbits = _orbit_ids(a.states)
    input_orbits = _orbit_ids(a.inputAlphabet)
    rules = []
    for r in a.rules:
        lay = rule_layout(a, r)
        total = lay["total"]
        f_off, f_dim = lay["frm"]
        t_off, t_dim = lay["to"]
        base = dnf_canonical(r.constraint)
        if not base.disjuncts:
            continue
        letter_choices = input_orbits[r.inp] if r.inp is not None else [(None, None)]
        for fid, fenc in state_orbits[r.frm]:
            c1 = base
            if fenc is not None:
                c1 = dnf_conjoin(c1, dnf_embed(dnf_of_zone(fenc.to_zone()), total, range(f_off, f_off + f_dim)))
                if not _sat(c1):
                    continue
            for lid, lenc in letter_choices:
                c2 = c1
                if lenc is not None:
                    i_off, i_dim = lay["inp"]
                    c2 = dnf_conjoin(c2, dnf_embed(dnf_of_zone(lenc.to_zone()), total, range(i_off, i_off + i_dim)))
                    if not _sat(c2):
                        continue
                for tid, tenc in state_orbits[r.to]:
                    c3 = c2
                    if tenc is not None:
                        c3 = dnf_conjoin(c3, dnf_embed(dnf_of_zone(tenc.to_zone()), total, range(t_off, t_off + t_dim)))
                    if _sat(c3):
                        rules.append(UntimedRule(fid, r.pops, lid, tid, r.pushes))
    def flagged(region: DefinableSet) -> tuple[str, ...]:
        out = []
        for l, d, c in region.locations:
            cc = dnf_canonical(c)
            if not cc.disjuncts:
                continue
            for oid, enc in state_orbits.get(l, ()):
                if enc is None or _sat(dnf_conjoin(cc, dnf_of_zone(enc.to_zone()))):
                    out.append(oid)
        return tuple(out)
    states = tuple(oid for items in state_orbits.values() for oid, _ in items)
    stack = tuple(l for l, _, c in a.stackAlphabet.locations if dnf_canonical(c).disjuncts)
    return UntimedPDA(
        states=states,
        stack=stack,
        initial=flagged(a.initial),
        final=flagged(a.final),
        rules=tuple(dict.fromkeys(rules)),
    )


def untimed_emptiness(p: UntimedPDA) -> bool:
    """Whether the untimed automaton accepts some word (exact).

    Acceptance needs a final state with any stack, so final states are
    first given silent pops of every symbol; multi-symbol rules are
    split into single-symbol steps; then the least reachability relation
    closed under composition and matched push/pop framing is computed.
    """
    rules = list(p.rules)
    for f in p.final:
        for s in p.stack:
            rules.append(UntimedRule(f, (s,), None, f, ()))
    states = list(dict.fromkeys(list(p.states) + [r.frm for r in rules] + [r.to for r in rules]))
    singles = []
    fresh = 0
    for r in rules:
        if len(r.pops) + len(r.pushes) <= 1:
            singles.append((r.frm, r.pops, r.to, r.pushes))
            continue
        cur = r.frm
        steps = [("pop", s) for s in r.pops] + [("push", s) for s in reversed(r.pushes)]
        for i, (kind, s) in enumerate(steps):
            if i + 1 == len(steps):
                nxt = r.to
            else:
                nxt = f"__u{fresh}"
                fresh += 1
                states.append(nxt)
            if kind == "pop":
                singles.append((cur, (s,), nxt, ()))
            else:
                singles.append((cur, (), nxt, (s,)))
            cur = nxt
    nop_edges: dict[str, set[str]] = {}
    pushes: dict[str, list[tuple[str, str]]] = {}
    pops: dict[tuple[str, str], list[str]] = {}
    for frm, pp, to, ps in singles:
        if not pp and not ps:
            nop_edges.setdefault(frm, set()).add(to)
        elif ps:
            pushes.setdefault(frm, []).append((to, ps[0]))
        else:
            pops.setdefault((frm, pp[0]), []).append(to)
    reach: set[tuple[str, str]] = set()
    succ: dict[str, set[str]] = {}
    pred: dict[str, set[str]] = {}
    push_into: dict[str, list[tuple[str, str]]] = {}
    for frm, targets in pushes.items():
        for to, s in targets:
            push_into.setdefault(to, []).append((frm, s))
    work = [(q, q) for q in states]
    for frm, tos in nop_edges.items():
        work.extend((frm, to) for to in tos)
    while work:
        x, y = work.pop()
        if (x, y) in reach:
            continue
        reach.add((x, y))
        succ.setdefault(x, set()).add(y)
        pred.setdefault(y, set()).add(x)
        for z in succ.get(y, ()):
            if (x, z) not in reach:
                work.append((x, z))
        for w in pred.get(x, ()):
            if (w, y) not in reach:
                work.append((w, y))
        for to in nop_edges.get(y, ()):
            if (x, to) not in reach:
                work.append((x, to))
        for w, s in push_into.get(x, ()):
            for q2 in pops.get((y, s), ()):
                if (w, q2) not in reach:
                    work.append((w, q2))
    return any((i, f) in reach for i in p.initial for f in p.final)


def untiming_route(a: TrPDA) -> Emptiness:
    """Decide emptiness of a timeless-stack automaton by untiming."""
    return Emptiness.NONEMPTY if untimed_emptiness(untiming_pda(a)) else Emptiness.EMPTY


@dataclass(frozen=True)
class CFGProduction:
    lhs: str
    letter: Optional[str]
    rhs: tuple[str, ...]


@dataclass(frozen=True)
class CFG:
    """Plain context-free grammar over orbit identifiers."""

    nonterminals: tuple[str, ...]
    terminals: tuple[str, ...]
    start: str
    productions: tuple[CFGProduction, ...]


def trcfg_untiming(g: TrCFG) -> CFG:
    """Replace every grammar symbol and letter by its orbits.

    A production survives for a tuple of orbits iff its constraint is
    satisfiable on them; the start symbol maps to the orbit of the start
    element's registers.  Generating some word is preserved, so grammar
    emptiness reduces to plain context-free emptiness.
    """
    sym_orbits = _orbit_ids(g.symbols)
    term_orbits = _orbit_ids(g.alphabet)
    start_label = g.start.label
    if g.start.point:
        want = orbit_of(g.start.point).key()
        hits = [oid for oid, enc in sym_orbits.get(start_label, ()) if enc is not None and enc.key() == want]
    else:
        hits = [oid for oid, enc in sym_orbits.get(start_label, ()) if enc is None]
    if not hits:
        raise ValueError("start element lies outside its symbol's constraint")
    start_id = hits[0]
    productions = []
    for p in g.productions:
        dl = g.symbols.dim_of(p.lhs)
        da = g.alphabet.dim_of(p.inp) if p.inp is not None else 0
        rdims = [g.symbols.dim_of(s) for s in p.rhs]
        total = dl + da + sum(rdims)
        base = dnf_canonical(p.constraint)
        if not base.disjuncts:
            continue
        letter_choices = term_orbits[p.inp] if p.inp is not None else [(None, None)]
        rhs_choices = [sym_orbits[s] for s in p.rhs]
        for lid, lenc in sym_orbits[p.lhs]:
            c1 = base
            if lenc is not None:
                c1 = dnf_conjoin(c1, dnf_embed(dnf_of_zone(lenc.to_zone()), total, range(dl)))
                if not _sat(c1):
                    continue
            for tid, tenc in letter_choices:
                c2 = c1
                if tenc is not None:
                    c2 = dnf_conjoin(c2, dnf_embed(dnf_of_zone(tenc.to_zone()), total, range(dl, dl + da)))
                    if not _sat(c2):
                        continue
                for combo in itertools.product(*rhs_choices):
                    c3 = c2
                    ok = True
                    at = dl + da
                    for (rid, renc), d in zip(combo, rdims):
                        if renc is not None:
                            c3 = dnf_conjoin(c3, dnf_embed(dnf_of_zone(renc.to_zone()), total, range(at, at + d)))
                            if not _sat(c3):
                                ok = False
                                break
                        at += d
                    if ok:
                        productions.append(CFGProduction(lid, tid, tuple(rid for rid, _ in combo)))
    nonterminals = tuple(oid for items in sym_orbits.values() for oid, _ in items)
    terminals = tuple(oid for items in term_orbits.values() for oid, _ in items)
    return CFG(
        nonterminals=nonterminals,
        terminals=terminals,
        start=start_id,
        productions=tuple(dict.fromkeys(productions)),
    )


def cfg_nonempty(c: CFG) -> bool:
    """Whether the grammar generates some word (productivity fixpoint)."""
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in c.productions:
            if p.lhs in productive:
                continue
            if all(s in productive for s in p.rhs):
                productive.add(p.lhs)
                changed = True
    return c.start in productive
