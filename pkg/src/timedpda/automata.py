"""Timed-register pushdown automata: models, classification, acceptance, oracle.

A trPDA rule relates a source state, a sequence of popped stack symbols, an
optional input letter, a target state and a sequence of pushed symbols.  Its
constraint is a ZoneDNF over the concatenated registers in the fixed order

    from-state regs, popped regs (top first), input regs,
    to-state regs, pushed regs (top last).

Stacks are stored as tuples with the top at the end, so a pop list (top first)
matches the reversed stack suffix and a push list is appended as given.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

from .constraints import (
    Bound,
    DimensionMismatchError,
    ZoneDNF,
    Zone,
    dnf_canonical,
    dnf_conjoin,
    dnf_embed,
    dnf_of_zone,
    dnf_project,
    dnf_true,
    parse_constraint,
    span_bound,
    zone_conjoin,
    zone_embed,
    zone_of,
    zone_project,
    zone_true,
    zone_witness,
)
from .definable import (
    DefinableRelation,
    DefinableSet,
    Element,
    OrbitInfiniteError,
    member,
)

__all__ = [
    "Rule",
    "TrPDA",
    "ShortFormTrPDA",
    "Production",
    "TrCFG",
    "TimedWord",
    "ClassificationReport",
    "UNKNOWN_AT_BOUND",
    "RunStep",
    "Nonempty",
    "NO_RUN_UP_TO_BOUND",
    "NoRunUpToBound",
    "MinskyInstr",
    "MinskyMachine",
    "make_trpda",
    "rule_layout",
    "validate",
    "to_short_form",
    "short_to_trpda",
    "trcfg_to_trpda",
    "accepts",
    "bounded_empty_oracle",
    "encode_minsky",
    "shift_word",
]


# ---------------------------------------------------------------------------
# Models


@dataclass(frozen=True)
class Rule:
    frm: str
    pops: tuple[str, ...]
    inp: Optional[str]
    to: str
    pushes: tuple[str, ...]
    constraint: ZoneDNF

    def __post_init__(self):
        object.__setattr__(self, "pops", tuple(self.pops))
        object.__setattr__(self, "pushes", tuple(self.pushes))


@dataclass(frozen=True)
class TrPDA:
    states: DefinableSet
    inputAlphabet: DefinableSet
    stackAlphabet: DefinableSet
    initial: DefinableSet
    final: DefinableSet
    rules: tuple[Rule, ...]

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))


@dataclass(frozen=True)
class ShortFormTrPDA:
    """Rules split into push / pop / nop relations of fixed shape.

    push entries are keyed (q, a-or-None, q', s') with constraints over the
    concatenated registers in key order; pop entries (q, s, a-or-None, q');
    nop entries (q, a-or-None, q').
    """

    states: DefinableSet
    inputAlphabet: DefinableSet
    stackAlphabet: DefinableSet
    initial: DefinableSet
    final: DefinableSet
    push: DefinableRelation
    pop: DefinableRelation
    nop: DefinableRelation


@dataclass(frozen=True)
class Production:
    lhs: str
    inp: Optional[str]
    rhs: tuple[str, ...]
    constraint: ZoneDNF

    def __post_init__(self):
        object.__setattr__(self, "rhs", tuple(self.rhs))


@dataclass(frozen=True)
class TrCFG:
    """One-state pushdown in grammar clothing; accepts by empty stack.

    Production constraints range over lhs regs, input regs, then rhs regs in
    listed order.
    """

    symbols: DefinableSet
    start: Element
    alphabet: DefinableSet
    productions: tuple[Production, ...]

    def __post_init__(self):
        object.__setattr__(self, "productions", tuple(self.productions))


@dataclass(frozen=True)
class TimedWord:
    letters: tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(self.letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.letters)


def shift_word(w: TimedWord, t: Union[int, Fraction]) -> TimedWord:
    t = Fraction(t)
    return TimedWord(tuple(
        Element(e.label, tuple(v + t for v in e.point)) for e in w.letters))


# ---------------------------------------------------------------------------
# Construction and classification


def _segments(a: TrPDA, r: Rule) -> list[tuple[str, int, ZoneDNF]]:
    """(label, dim, component constraint) per block in rule variable order."""
    segs = [(r.frm, a.states.dim_of(r.frm), a.states.constraint_of(r.frm))]
    for s in r.pops:
        segs.append((s, a.stackAlphabet.dim_of(s),
                     a.stackAlphabet.constraint_of(s)))
    if r.inp is not None:
        segs.append((r.inp, a.inputAlphabet.dim_of(r.inp),
                     a.inputAlphabet.constraint_of(r.inp)))
    segs.append((r.to, a.states.dim_of(r.to), a.states.constraint_of(r.to)))
    for s in r.pushes:
        segs.append((s, a.stackAlphabet.dim_of(s),
                     a.stackAlphabet.constraint_of(s)))
    return segs


def rule_layout(a: TrPDA, r: Rule) -> dict:
    """Variable offsets of each block of a rule's constraint."""
    segs = _segments(a, r)
    offs = []
    at = 0
    for _, d, _ in segs:
        offs.append((at, d))
        at += d
    out = {"total": at, "frm": offs[0]}
    npop = len(r.pops)
    out["pops"] = offs[1:1 + npop]
    k = 1 + npop
    if r.inp is not None:
        out["inp"] = offs[k]
        k += 1
    else:
        out["inp"] = None
    out["to"] = offs[k]
    out["pushes"] = offs[k + 1:]
    return out


def make_trpda(states: DefinableSet, inputAlphabet: DefinableSet,
               stackAlphabet: DefinableSet, initial: DefinableSet,
               final: DefinableSet, rules: Sequence[Rule]) -> TrPDA:
    """Build a trPDA, conjoining component constraints into every rule.

    Checks that labels resolve, rule constraint dimensions match the
    concatenated block dimensions, and initial/final are label-wise subsets
    of the state set.
    """
    for sub, name in ((initial, "initial"), (final, "final")):
        for label, d, c in sub.locations:
            got = states.get(label)
            if got is None:
                raise KeyError(f"{name} location {label!r} not a state")
            if got[0] != d:
                raise DimensionMismatchError(
                    f"{name} location {label!r}: dim {d} != state dim {got[0]}")
    pre = TrPDA(states, inputAlphabet, stackAlphabet, initial, final, ())
    built = []
    for r in rules:
        segs = _segments(pre, r)
        total = sum(d for _, d, _ in segs)
        if r.constraint.dim != total:
            raise DimensionMismatchError(
                f"rule {r.frm}->{r.to}: constraint dim {r.constraint.dim} "
                f"!= {total}")
        c = r.constraint
        at = 0
        for _, d, comp in segs:
            if d:
                c = dnf_conjoin(c, dnf_embed(comp, total,
                                             range(at, at + d)))
            at += d
        built.append(Rule(r.frm, r.pops, r.inp, r.to, r.pushes,
                          dnf_canonical(c)))
    return TrPDA(states, inputAlphabet, stackAlphabet, initial, final,
                 tuple(built))


@dataclass(frozen=True)
class ClassificationReport:
    states_span: Optional[int]
    input_span: Optional[int]
    stack_span: Optional[int]
    timeless_stack: bool
    orbit_finite_class: bool
    failures: tuple[str, ...]
    rule_errors: tuple[str, ...]

    @property
    def states_orbit_finite(self) -> bool:
        return self.states_span is not None

    @property
    def input_orbit_finite(self) -> bool:
        return self.input_span is not None

    @property
    def stack_orbit_finite(self) -> bool:
        return self.stack_span is not None


def _set_span(X: DefinableSet) -> Optional[int]:
    best = 0
    for _, d, c in X.locations:
        if d == 0:
            continue
        s = span_bound(c)
        if s is None:
            return None
        best = max(best, s)
    return best


def validate(a: TrPDA) -> ClassificationReport:
    """Orbit-finiteness of the components and of every rule's projections."""
    failures: list[str] = []
    rule_errors: list[str] = []
    spans = {}
    for X, name in ((a.states, "states"), (a.inputAlphabet, "input"),
                    (a.stackAlphabet, "stack")):
        spans[name] = _set_span(X)
        if spans[name] is None:
            failures.append(f"{name} set has unbounded span")
    cls_ok = all(v is not None for v in spans.values())
    for idx, r in enumerate(a.rules):
        try:
            lay = rule_layout(a, r)
        except KeyError as e:
            rule_errors.append(f"rule {idx}: {e}")
            cls_ok = False
            continue
        if r.constraint.dim != lay["total"]:
            rule_errors.append(
                f"rule {idx} ({r.frm}->{r.to}): constraint dim "
                f"{r.constraint.dim} != {lay['total']}")
            cls_ok = False
            continue
        lhs = [i for off, d in [lay["frm"]] + lay["pops"]
               for i in range(off, off + d)]
        rhs = [i for off, d in [lay["to"]] + lay["pushes"]
               for i in range(off, off + d)]
        for side, coords in (("lhs", lhs), ("rhs", rhs)):
            if not coords:
                continue
            s = span_bound(dnf_project(r.constraint, coords))
            if s is None:
                failures.append(
                    f"rule {idx} ({r.frm}->{r.to}): {side} projection has "
                    f"unbounded span")
                cls_ok = False
    return ClassificationReport(
        states_span=spans["states"],
        input_span=spans["input"],
        stack_span=spans["stack"],
        timeless_stack=a.stackAlphabet.is_timeless(),
        orbit_finite_class=cls_ok and not rule_errors,
        failures=tuple(failures),
        rule_errors=tuple(rule_errors),
    )


# ---------------------------------------------------------------------------
# Short form


def _identity_dnf(dim: int, pairs: Sequence[tuple[int, int]]) -> ZoneDNF:
    zero = Bound(Fraction(0), False)
    bounds = []
    for i, j in pairs:
        bounds.append((i, j, zero))
        bounds.append((j, i, zero))
    return dnf_of_zone(zone_of(dim, bounds))


def short_to_trpda(s: ShortFormTrPDA) -> TrPDA:
    """View the three short-form relations as one rule list.

    The relation key orders coincide with the rule variable order, so entry
    constraints transfer unchanged.
    """
    rules = []
    for (q, aa, q2, sym), c in s.push.entries:
        rules.append(Rule(q, (), aa, q2, (sym,), c))
    for (q, sym, aa, q2), c in s.pop.entries:
        rules.append(Rule(q, (sym,), aa, q2, (), c))
    for (q, aa, q2), c in s.nop.entries:
        rules.append(Rule(q, (), aa, q2, (), c))
    return TrPDA(s.states, s.inputAlphabet, s.stackAlphabet, s.initial,
                 s.final, tuple(rules))


def _is_short(r: Rule) -> bool:
    return len(r.pops) + len(r.pushes) <= 1


def to_short_form(a: TrPDA) -> ShortFormTrPDA:
    """Split multi-pop/multi-push rules via states buffering a stack prefix.

    A rule popping p1..pk (top first) and pushing u1..um is simulated by k
    silent pops loading the buffer, one state transition carrying the rule's
    letter and constraint, and m silent pushes unloading it.  Buffered
    states constrain the held symbols by the corresponding projection of the
    rule constraint, which keeps every new rule's projections within the
    spans certified for the original rule.
    """
    rep = validate(a)
    if not rep.orbit_finite_class:
        raise OrbitInfiniteError("; ".join(rep.failures + rep.rule_errors)
                                 or "unclassified")

    state_locs: dict[str, tuple[int, ZoneDNF]] = {
        l: (d, c) for l, d, c in a.states.locations}
    push_entries: list[tuple[tuple, ZoneDNF]] = []
    pop_entries: list[tuple[tuple, ZoneDNF]] = []
    nop_entries: list[tuple[tuple, ZoneDNF]] = []

    def add_state(label: str, dim: int, c: ZoneDNF) -> None:
        if label in state_locs:
            raise ValueError(f"buffer state label collision: {label!r}")
        state_locs[label] = (dim, c)

    for idx, r in enumerate(a.rules):
        lay = rule_layout(a, r)
        total = lay["total"]
        if _is_short(r):
            if len(r.pops) == 1:
                pop_entries.append(((r.frm, r.pops[0], r.inp, r.to),
                                    r.constraint))
            elif len(r.pushes) == 1:
                push_entries.append(((r.frm, r.inp, r.to, r.pushes[0]),
                                     r.constraint))
            else:
                nop_entries.append(((r.frm, r.inp, r.to), r.constraint))
            continue

        frm_off, frm_d = lay["frm"]
        to_off, to_d = lay["to"]
        k, m = len(r.pops), len(r.pushes)

        # Load stage i holds p1..pi; its registers are frm regs + held regs.
        load_labels = [r.frm]
        for i in range(1, k + 1):
            lbl = f"{r.frm}@r{idx}+{i}"
            coords = list(range(frm_off, frm_off + frm_d))
            for off, d in lay["pops"][:i]:
                coords.extend(range(off, off + d))
            add_state(lbl, len(coords), dnf_project(r.constraint, coords))
            load_labels.append(lbl)
        for i in range(1, k + 1):
            src, dst = load_labels[i - 1], load_labels[i]
            sd = state_locs[src][0]
            pd = a.stackAlphabet.dim_of(r.pops[i - 1])
            dim = sd + pd + state_locs[dst][0]
            pairs = [(j, sd + pd + j) for j in range(sd)]
            pairs += [(sd + j, sd + pd + sd + j) for j in range(pd)]
            pop_entries.append(((src, r.pops[i - 1], None, dst),
                                _identity_dnf(dim, pairs)))

        # Unload stage j still holds u(j+1)..um; registers are to regs +
        # held regs.
        unload_labels = []
        for j in range(m):
            lbl = f"{r.to}@r{idx}-{j}"
            coords = list(range(to_off, to_off + to_d))
            for off, d in lay["pushes"][j:]:
                coords.extend(range(off, off + d))
            add_state(lbl, len(coords), dnf_project(r.constraint, coords))
            unload_labels.append(lbl)
        unload_labels.append(r.to)
        for j in range(m):
            src, dst = unload_labels[j], unload_labels[j + 1]
            sd = state_locs[src][0]
            dd = state_locs[dst][0]
            ud = a.stackAlphabet.dim_of(r.pushes[j])
            dim = sd + dd + ud
            pairs = [(i2, sd + i2) for i2 in range(to_d)]
            pairs += [(to_d + ud + i2, sd + to_d + i2)
                      for i2 in range(sd - to_d - ud)]
            pairs += [(to_d + i2, sd + dd + i2) for i2 in range(ud)]
            push_entries.append(((src, None, dst, r.pushes[j]),
                                 _identity_dnf(dim, pairs)))

        # The carrying transition consumes the buffer and emits the pushes.
        src, dst = load_labels[k], unload_labels[0]
        sd = state_locs[src][0]
        ad = a.inputAlphabet.dim_of(r.inp) if r.inp is not None else 0
        dd = state_locs[dst][0]
        posmap = list(range(sd + ad)) + [sd + ad + i for i in range(dd)]
        nop_entries.append(((src, r.inp, dst),
                            dnf_embed(r.constraint, sd + ad + dd, posmap)))

    states = DefinableSet(tuple((l, d, c)
                                for l, (d, c) in state_locs.items()))
    return ShortFormTrPDA(
        states=states,
        inputAlphabet=a.inputAlphabet,
        stackAlphabet=a.stackAlphabet,
        initial=a.initial,
        final=a.final,
        push=DefinableRelation(4, tuple(push_entries)),
        pop=DefinableRelation(4, tuple(pop_entries)),
        nop=DefinableRelation(3, tuple(nop_entries)),
    )


def trcfg_to_trpda(g: TrCFG) -> TrPDA:
    """One-state pushdown for a grammar; empty stack via a bottom marker.

    Pushing the right-hand side with its first symbol on top realizes
    leftmost derivations.
    """
    bot = "__cfg_bot"
    if g.symbols.get(bot) is not None:
        raise ValueError(f"stack label {bot!r} reserved")
    stack = DefinableSet(g.symbols.locations + ((bot, 0, dnf_true(0)),))
    states = DefinableSet((("boot", 0, dnf_true(0)),
                           ("run", 0, dnf_true(0)),
                           ("done", 0, dnf_true(0))))
    start_dim = g.symbols.dim_of(g.start.label)
    # Difference constraints cannot pin absolute values, so the start symbol
    # is pushed with free registers; grammar languages are translation-closed
    # and emptiness/untiming are unaffected.
    rules = [
        Rule("boot", (), None, "run", (bot, g.start.label),
             dnf_true(start_dim)),
        Rule("run", (bot,), None, "done", (), dnf_true(0)),
    ]
    for p in g.productions:
        ldim = g.symbols.dim_of(p.lhs)
        adim = g.alphabet.dim_of(p.inp) if p.inp is not None else 0
        rdims = [g.symbols.dim_of(s) for s in p.rhs]
        total = ldim + adim + sum(rdims)
        if p.constraint.dim != total:
            raise DimensionMismatchError(
                f"production {p.lhs}: constraint dim {p.constraint.dim} "
                f"!= {total}")
        # Rule order pops lhs, reads, then pushes rhs reversed (first on
        # top); remap production coordinates accordingly.
        posmap = list(range(ldim + adim))
        at = ldim + adim
        offs = []
        for d in rdims:
            offs.append(at)
            at += d
        tgt = ldim + adim
        tgt_offs = {}
        for j in range(len(p.rhs) - 1, -1, -1):
            tgt_offs[j] = tgt
            tgt += rdims[j]
        for j, d in enumerate(rdims):
            posmap.extend(range(tgt_offs[j], tgt_offs[j] + d))
        rules.append(Rule("run", (p.lhs,), p.inp, "run",
                          tuple(reversed(p.rhs)),
                          dnf_embed(p.constraint, total, posmap)))
    initial = DefinableSet((("boot", 0, dnf_true(0)),))
    final = DefinableSet((("done", 0, dnf_true(0)),))
    return make_trpda(states, g.alphabet, stack, initial, final, rules)


# ---------------------------------------------------------------------------
# Symbolic runs


@dataclass(frozen=True)
class _Node:
    """Search node over the live variables only.

    Variable 0 is the time origin; regs and stack hold live indices of the
    current state's and stacked symbols' registers.  hist records the
    disjunct choices needed to replay the run at full dimension.
    """

    state: str
    regs: tuple[int, ...]
    stack: tuple[tuple[str, tuple[int, ...]], ...]
    zone: Zone
    pos: int
    silent: int
    steps: int
    hist: tuple[tuple, ...]


class _UnknownAtBound:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UnknownAtBound"

    def __bool__(self) -> bool:
        raise TypeError("UnknownAtBound is not a truth value")


UNKNOWN_AT_BOUND = _UnknownAtBound()


@dataclass(frozen=True)
class RunStep:
    rule_index: int
    state: Element
    letter: Optional[Element]


@dataclass(frozen=True)
class Nonempty:
    word: TimedWord
    run: tuple[RunStep, ...]


class NoRunUpToBound:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NoRunUpToBound"


NO_RUN_UP_TO_BOUND = NoRunUpToBound()


def _grow(z: Zone, new_dim: int) -> Zone:
    return zone_embed(z, new_dim, range(z.dim))


def _conjoin_at(z: Zone, c: ZoneDNF, coords: Sequence[int]
                ) -> list[tuple[Zone, int]]:
    """Conjoin c (embedded at coords) with z; one zone per live disjunct."""
    out = []
    for di, d in enumerate(dnf_embed(c, z.dim, coords).disjuncts):
        w = zone_conjoin(z, d)
        if not w.empty:
            out.append((w, di))
    return out


def _pin(z: Zone, var: int, value: Fraction) -> Zone:
    # Register values are pinned relative to the time origin, variable 0.
    b1 = Bound(Fraction(value), False)
    b2 = Bound(-Fraction(value), False)
    return zone_conjoin(z, zone_of(z.dim, [(var, 0, b1), (0, var, b2)]))


def _initial_nodes(a: TrPDA) -> list[_Node]:
    nodes = []
    for label, d, c in a.initial.locations:
        dim = 1 + d
        regs = tuple(range(1, dim))
        state_c = a.states.constraint_of(label)
        for z, di in _conjoin_at(zone_true(dim), c, regs):
            for z2, dj in _conjoin_at(z, state_c, regs):
                nodes.append(_Node(label, regs, (), z2, 0, 0, 0,
                                   (("init", label, di, dj),)))
    return nodes


def _apply_rule(a: TrPDA, node: _Node, ridx: int, r: Rule,
                letter: Optional[Element]) -> list[_Node]:
    """Successors of node under rule r; empty when labels or zones refuse.

    letter is the consumed word element for accepts-style search, or None
    to leave input registers free (oracle search).  The successor zone is
    projected onto origin, stack and target registers; this is exact since
    later steps never constrain retired variables.
    """
    if r.frm != node.state:
        return []
    k = len(r.pops)
    if k > len(node.stack):
        return []
    popped = node.stack[len(node.stack) - k:]
    for want, (have, _) in zip(r.pops, reversed(popped)):
        if want != have:
            return []
    base = node.stack[:len(node.stack) - k]
    old_dim = node.zone.dim
    ad = a.inputAlphabet.dim_of(r.inp) if r.inp is not None else 0
    to_d = a.states.dim_of(r.to)
    push_ds = [a.stackAlphabet.dim_of(s) for s in r.pushes]
    new_dim = old_dim + ad + to_d + sum(push_ds)

    coords: list[int] = list(node.regs)
    for i in range(k):
        coords.extend(popped[k - 1 - i][1])
    at = old_dim
    inp_regs = tuple(range(at, at + ad))
    coords.extend(inp_regs)
    at += ad
    to_regs = tuple(range(at, at + to_d))
    coords.extend(to_regs)
    at += to_d
    push_regs = []
    for d in push_ds:
        push_regs.append(tuple(range(at, at + d)))
        coords.extend(push_regs[-1])
        at += d

    z = _grow(node.zone, new_dim)
    if letter is not None:
        for var, val in zip(inp_regs, letter.point):
            z = _pin(z, var, val)
        if z.empty:
            return []

    keep = [0]
    for _, regs in base:
        keep.extend(regs)
    for p in push_regs:
        keep.extend(p)
    keep.extend(to_regs)
    renum = {v: i for i, v in enumerate(keep)}
    new_stack = []
    for lbl, regs in base:
        new_stack.append((lbl, tuple(renum[v] for v in regs)))
    for lbl, p in zip(r.pushes, push_regs):
        new_stack.append((lbl, tuple(renum[v] for v in p)))
    new_regs = tuple(renum[v] for v in to_regs)

    out = []
    for z2, di in _conjoin_at(z, r.constraint, coords):
        out.append(_Node(
            state=r.to,
            regs=new_regs,
            stack=tuple(new_stack),
            zone=zone_project(z2, keep),
            pos=node.pos + (1 if r.inp is not None else 0),
            silent=0 if r.inp is not None else node.silent + 1,
            steps=node.steps + 1,
            hist=node.hist + (("rule", ridx, di, letter),),
        ))
    return out


def _accepting_hist(a: TrPDA, node: _Node) -> Optional[tuple[tuple, ...]]:
    got = a.final.get(node.state)
    if got is None:
        return None
    for _, di in _conjoin_at(node.zone, got[1], node.regs):
        return node.hist + (("final", di),)
    return None


def _replay(a: TrPDA, hist: Sequence[tuple]) -> tuple[
        Zone, list[tuple[int, tuple[int, ...], tuple[int, ...]]]]:
    """Re-run a history at full dimension (no projection)."""
    assert hist and hist[0][0] == "init"
    _, label, di, dj = hist[0]
    d = a.states.dim_of(label)
    regs = tuple(range(1, 1 + d))
    z = zone_true(1 + d)
    z = zone_conjoin(z, dnf_embed(
        a.initial.constraint_of(label), z.dim, regs).disjuncts[di])
    z = zone_conjoin(z, dnf_embed(
        a.states.constraint_of(label), z.dim, regs).disjuncts[dj])
    stack: list[tuple[str, tuple[int, ...]]] = []
    steps = []
    for entry in hist[1:]:
        if entry[0] == "final":
            z = zone_conjoin(z, dnf_embed(
                a.final.constraint_of(label), z.dim,
                regs).disjuncts[entry[1]])
            continue
        _, ridx, di, letter = entry
        r = a.rules[ridx]
        k = len(r.pops)
        popped = stack[len(stack) - k:] if k else []
        if k:
            del stack[len(stack) - k:]
        old_dim = z.dim
        ad = a.inputAlphabet.dim_of(r.inp) if r.inp is not None else 0
        to_d = a.states.dim_of(r.to)
        push_ds = [a.stackAlphabet.dim_of(s) for s in r.pushes]
        new_dim = old_dim + ad + to_d + sum(push_ds)
        coords = list(regs)
        for i in range(k):
            coords.extend(popped[k - 1 - i][1])
        at = old_dim
        inp_regs = tuple(range(at, at + ad))
        coords.extend(inp_regs)
        at += ad
        to_regs = tuple(range(at, at + to_d))
        coords.extend(to_regs)
        at += to_d
        z = _grow(z, new_dim)
        for pd, lbl in zip(push_ds, r.pushes):
            stack.append((lbl, tuple(range(at, at + pd))))
            coords.extend(stack[-1][1])
            at += pd
        if letter is not None:
            for var, val in zip(inp_regs, letter.point):
                z = _pin(z, var, val)
        z = zone_conjoin(z, dnf_embed(r.constraint, z.dim,
                                      coords).disjuncts[di])
        label, regs = r.to, to_regs
        steps.append((ridx, to_regs, inp_regs))
    return z, steps


def accepts(a: TrPDA, w: TimedWord,
            maxSilent: Optional[int] = None):
    """Symbolic word acceptance: True, False, or UNKNOWN_AT_BOUND.

    Explores all rule skeletons interleaving the word's letters with at most
    maxSilent silent rules between consecutive letters (and before/after the
    word).  False is exact when no branch was cut off by the silent budget.
    """
    if maxSilent is None:
        maxSilent = 2 * len(w) + 4
    for e in w:
        if not member(a.inputAlphabet, e):
            raise ValueError(f"letter {e.label!r} {e.point} not in the "
                             f"input alphabet")
    truncated = False
    stack = _initial_nodes(a)
    letters = w.letters
    while stack:
        node = stack.pop()
        if node.pos == len(letters):
            if _accepting_hist(a, node) is not None:
                return True
        for ridx, r in enumerate(a.rules):
            if r.inp is None:
                if node.silent >= maxSilent:
                    if r.frm == node.state:
                        truncated = True
                    continue
                stack.extend(_apply_rule(a, node, ridx, r, None))
            else:
                if node.pos >= len(letters):
                    continue
                if letters[node.pos].label != r.inp:
                    continue
                stack.extend(_apply_rule(a, node, ridx, r,
                                         letters[node.pos]))
    return UNKNOWN_AT_BOUND if truncated else False


def _witness_run(a: TrPDA, hist: Sequence[tuple]
                 ) -> tuple[TimedWord, tuple[RunStep, ...]]:
    zone, trace = _replay(a, hist)
    point = zone_witness(zone)
    assert point is not None, "projected search admitted an infeasible run"
    origin = point[0]
    letters = []
    steps = []
    for ridx, to_regs, inp_regs in trace:
        r = a.rules[ridx]
        st = Element(r.to, tuple(point[i] - origin for i in to_regs))
        letter = None
        if r.inp is not None:
            letter = Element(r.inp,
                             tuple(point[i] - origin for i in inp_regs))
            letters.append(letter)
        steps.append(RunStep(ridx, st, letter))
    return TimedWord(tuple(letters)), tuple(steps)


def bounded_empty_oracle(a: TrPDA, maxSteps: int):
    """Exact emptiness for runs of at most maxSteps transitions.

    Iterative deepening over the transition count; within a depth, rules are
    tried in declaration order, so witnesses are reproducible and shortest
    first.
    """
    for depth in range(maxSteps + 1):
        stack = _initial_nodes(a)
        while stack:
            node = stack.pop()
            hist = _accepting_hist(a, node)
            if hist is not None:
                word, steps = _witness_run(a, hist)
                return Nonempty(word, steps)
            if node.steps >= depth:
                continue
            for ridx in range(len(a.rules) - 1, -1, -1):
                stack.extend(_apply_rule(a, node, ridx, a.rules[ridx], None))
    return NO_RUN_UP_TO_BOUND


# ---------------------------------------------------------------------------
# Minsky machines


@dataclass(frozen=True)
class MinskyInstr:
    op: str
    arg: Optional[int] = None


@dataclass(frozen=True)
class MinskyMachine:
    """1-based program over two counters; `halt` stops, deadlocks block."""

    instrs: tuple[MinskyInstr, ...]

    def __post_init__(self):
        object.__setattr__(self, "instrs", tuple(self.instrs))
        ops = {"inc1", "inc2", "dec1", "dec2", "jz1", "jz2", "goto", "halt"}
        for i, ins in enumerate(self.instrs, start=1):
            if ins.op not in ops:
                raise ValueError(f"instruction {i}: unknown op {ins.op!r}")
            if ins.op in ("jz1", "jz2", "goto"):
                if ins.arg is None or not (1 <= ins.arg <= len(self.instrs)):
                    raise ValueError(f"instruction {i}: bad target "
                                     f"{ins.arg!r}")
            elif ins.arg is not None:
                raise ValueError(f"instruction {i}: {ins.op} takes no "
                                 f"target")


def encode_minsky(m: MinskyMachine) -> TrPDA:
    """Halting as trPDA emptiness.

    A configuration with counters (n1, n2) at program point p is the state
    (p, t+n1+n2) over the stack (top first) (top,t+n1) ... (top,t+1),
    (bot,t): counter 1 is the number of `top` symbols and counter 2 the gap
    between the state register and the stack top.  The increment-1 rule pops
    the top symbol (top,u) and pushes (top,u), (top,u+1) while moving the
    state register up by one; the other rules follow the same bookkeeping.
    Rule spans are unbounded, so the result is deliberately outside the
    orbit-finite class and only the bounded oracle applies.
    """
    n = len(m.instrs)
    letters = ["inc1", "inc2", "dec1", "dec2", "jz1", "jz2", "goto", "halt"]
    inputAlphabet = DefinableSet(tuple((x, 0, dnf_true(0)) for x in letters))
    stackAlphabet = DefinableSet((("top", 1, dnf_true(1)),
                                  ("bot", 1, dnf_true(1))))
    locs = [("init", 0, dnf_true(0)), ("h", 1, dnf_true(1))]
    for i in range(1, n + 1):
        locs.append((f"p{i}", 1, dnf_true(1)))
    states = DefinableSet(tuple(locs))

    def c(text: str, dim: int) -> ZoneDNF:
        return parse_constraint(text, dim)

    rules = [Rule("init", (), None, "p1", ("bot",),
                  c("x1 - x2 = 0", 2))]
    for i, ins in enumerate(m.instrs, start=1):
        # Falling off the end of the program deadlocks (no rule emitted).
        p, nxt = f"p{i}", f"p{i + 1}" if i < n else None
        if ins.op == "inc1":
            if nxt:
                for s in ("top", "bot"):
                    rules.append(Rule(p, (s,), "inc1", nxt, (s, "top"),
                                      c("x3 - x1 = 1 & x4 - x2 = 0 & "
                                        "x5 - x2 = 1", 5)))
        elif ins.op == "inc2":
            if nxt:
                rules.append(Rule(p, (), "inc2", nxt, (),
                                  c("x2 - x1 = 1", 2)))
        elif ins.op == "dec1":
            if nxt:
                rules.append(Rule(p, ("top",), "dec1", nxt, (),
                                  c("x1 - x3 = 1", 3)))
        elif ins.op == "dec2":
            if nxt:
                for s in ("top", "bot"):
                    rules.append(Rule(p, (s,), "dec2", nxt, (s,),
                                      c("x1 - x2 >= 1 & x1 - x3 = 1 & "
                                        "x4 - x2 = 0", 4)))
        elif ins.op == "jz1":
            tgt = f"p{ins.arg}"
            rules.append(Rule(p, ("bot",), "jz1", tgt, ("bot",),
                              c("x3 - x1 = 0 & x4 - x2 = 0", 4)))
            if nxt:
                rules.append(Rule(p, ("top",), "jz1", nxt, ("top",),
                                  c("x3 - x1 = 0 & x4 - x2 = 0", 4)))
        elif ins.op == "jz2":
            tgt = f"p{ins.arg}"
            for s in ("top", "bot"):
                rules.append(Rule(p, (s,), "jz2", tgt, (s,),
                                  c("x1 - x2 = 0 & x3 - x1 = 0 & "
                                    "x4 - x2 = 0", 4)))
                if nxt:
                    rules.append(Rule(p, (s,), "jz2", nxt, (s,),
                                      c("x1 - x2 >= 1 & x3 - x1 = 0 & "
                                        "x4 - x2 = 0", 4)))
        elif ins.op == "goto":
            rules.append(Rule(p, (), "goto", f"p{ins.arg}", (),
                              c("x2 - x1 = 0", 2)))
        elif ins.op == "halt":
            rules.append(Rule(p, (), "halt", "h", (),
                              c("x2 - x1 = 0", 2)))
    initial = DefinableSet((("init", 0, dnf_true(0)),))
    final = DefinableSet((("h", 1, dnf_true(1)),))
    return make_trpda(states, inputAlphabet, stackAlphabet, initial, final,
                      rules)
