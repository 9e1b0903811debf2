"""Parsers and printers for the text model formats.

One lexical layer serves every brace-structured format (.set, .rel,
.trpda, .trcfg, .word, .dtpda): identifiers, exact numeric literals
(integer, decimal, or fraction), punctuation, double-quoted constraint
strings, and ``#`` line comments.  The .eq and .mm formats are
line-oriented and parsed separately.

Every ``parse_*`` takes the file text and raises FormatError carrying a
1-based line and column on malformed input.  Every ``format_*`` emits
text that parses back to an equal object; models whose labels are not
plain identifiers (as produced by the stack-untiming and region
constructions) are printed under fresh sanitized names.  Label names
starting with two underscores are reserved for generated machinery and
rejected in model files; equation files may use them when a ``# vars:``
header declares them, which the printer always emits.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .constraints import (
    ConstraintParseError,
    ZoneDNF,
    dnf_true,
    format_constraint,
    parse_constraint,
)
from .definable import DefinableRelation, DefinableSet, Element
from .automata import (
    MinskyInstr,
    MinskyMachine,
    Production,
    Rule,
    TimedWord,
    TrCFG,
    TrPDA,
    make_trpda,
)
from .dtpda import (
    ClockConstraintError,
    DtPDA,
    DtRule,
    NOP,
    make_dtpda,
    parse_clock_constraint,
    pop_op,
    push_op,
)
from . import intsets

__all__ = [
    "FormatError",
    "parse_set",
    "format_set",
    "parse_rel",
    "format_rel",
    "parse_trpda",
    "format_trpda",
    "parse_trcfg",
    "format_trcfg",
    "parse_word",
    "format_word",
    "parse_dtpda",
    "format_dtpda",
    "parse_eq",
    "format_eq",
    "parse_minsky",
    "format_minsky",
    "EXT_PARSERS",
]


class FormatError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Lexer for the brace-structured formats
# ---------------------------------------------------------------------------


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#[^\n]*)
      | (?P<string>"(?:[^"\\\n]|\\.)*")
      | (?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)
      | (?P<name>[A-Za-z_]\w*)
      | (?P<punct>[{}()\[\];,=|])
    """,
    re.VERBOSE,
)

_NAME_RE = re.compile(r"[A-Za-z_]\w*\Z")


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


class _Lexer:
    def __init__(self, text: str):
        self.toks: list[_Tok] = []
        line, bol = 1, 0
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise FormatError(
                    f"unexpected character {text[pos]!r}", line, pos - bol + 1)
            kind = m.lastgroup
            chunk = m.group()
            if kind not in ("ws", "comment"):
                self.toks.append(_Tok(kind, chunk, line, pos - bol + 1))
            nl = chunk.count("\n")
            if nl:
                line += nl
                bol = pos + chunk.rfind("\n") + 1
            pos = m.end()
        self.toks.append(_Tok("eof", "", line, len(text) - bol + 1))
        self.at = 0

    def peek(self) -> _Tok:
        return self.toks[self.at]

    def next(self) -> _Tok:
        t = self.toks[self.at]
        if t.kind != "eof":
            self.at += 1
        return t

    def error(self, msg: str, tok: Optional[_Tok] = None) -> FormatError:
        t = tok or self.peek()
        return FormatError(msg, t.line, t.col)

    def expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind
            got = t.text if t.kind != "eof" else "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.next()

    def at_word(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "name" and t.text == word

    def take_word(self, word: str) -> bool:
        if self.at_word(word):
            self.next()
            return True
        return False


def _unquote(tok: _Tok) -> str:
    body = tok.text[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def _label(lx: _Lexer, what: str = "label") -> str:
    t = lx.expect("name")
    if t.text.startswith("__"):
        raise lx.error(
            f"{what} {t.text!r} uses the reserved '__' prefix", t)
    return t.text


def _int(lx: _Lexer) -> int:
    t = lx.expect("num")
    if "/" in t.text or "." in t.text:
        raise lx.error(f"expected an integer, found {t.text!r}", t)
    return int(t.text)


def _value(lx: _Lexer) -> Fraction:
    t = lx.expect("num")
    if "/" in t.text:
        a, b = t.text.split("/")
        return Fraction(int(a), int(b))
    return Fraction(t.text)


def _constraint(lx: _Lexer, dim: int) -> ZoneDNF:
    t = lx.expect("string")
    try:
        return parse_constraint(_unquote(t), dim)
    except ConstraintParseError as e:
        raise lx.error(f"bad constraint for dim {dim}: {e}", t) from e


def _where(lx: _Lexer, dim: int) -> ZoneDNF:
    """Optional for dim 0 (trivially true); required otherwise."""
    if lx.take_word("where"):
        if dim == 0:
            raise lx.error("dim-0 entries take no where clause")
        return _constraint(lx, dim)
    if dim == 0:
        return dnf_true(0)
    raise lx.error(f"missing where clause for dim {dim}")


# ---------------------------------------------------------------------------
# Definable sets and relations
# ---------------------------------------------------------------------------


def _set_body(lx: _Lexer) -> DefinableSet:
    lx.expect("punct", "{")
    locs = []
    while not (lx.peek().kind == "punct" and lx.peek().text == "}"):
        lx.expect("name", "loc")
        label = _label(lx)
        lx.expect("name", "dim")
        d = _int(lx)
        if d < 0:
            raise lx.error("dim must be >= 0")
        c = _where(lx, d)
        lx.expect("punct", ";")
        locs.append((label, d, c))
    lx.expect("punct", "}")
    return DefinableSet(tuple(locs))


def _fmt_set_body(ds: DefinableSet, indent: str) -> str:
    lines = ["{"]
    for label, d, c in ds.locations:
        if d == 0:
            if not c.disjuncts:
                raise ValueError(
                    f"dim-0 location {label!r} with empty constraint has "
                    f"no textual form")
            lines.append(f"{indent}  loc {label} dim 0;")
        else:
            lines.append(
                f'{indent}  loc {label} dim {d} where "{format_constraint(c)}";')
    lines.append(indent + "}")
    return "\n".join(lines)


def parse_set(text: str) -> tuple[str, DefinableSet]:
    """``set NAME { loc LABEL dim D [where "C"]; ... }``"""
    lx = _Lexer(text)
    lx.expect("name", "set")
    name = _label(lx, "set name")
    ds = _set_body(lx)
    lx.expect("eof")
    return name, ds


def format_set(name: str, ds: DefinableSet) -> str:
    return f"set {name} " + _fmt_set_body(ds, "") + "\n"


def parse_rel(text: str) -> tuple[str, DefinableRelation]:
    """``rel NAME arity A { entry (L1,...,LA) [dim D] [where "C"]; ... }``

    ``eps`` stands for an absent component.  The constraint dimension
    defaults to the highest variable index mentioned.
    """
    lx = _Lexer(text)
    lx.expect("name", "rel")
    name = _label(lx, "relation name")
    lx.expect("name", "arity")
    arity = _int(lx)
    if arity < 1:
        raise lx.error("arity must be >= 1")
    lx.expect("punct", "{")
    entries = []
    while not (lx.peek().kind == "punct" and lx.peek().text == "}"):
        lx.expect("name", "entry")
        lx.expect("punct", "(")
        key = []
        for i in range(arity):
            if i:
                lx.expect("punct", ",")
            key.append(None if lx.take_word("eps") else _label(lx))
        lx.expect("punct", ")")
        if lx.take_word("dim"):
            d = _int(lx)
        else:
            d = None
        if lx.at_word("where"):
            lx.next()
            t = lx.expect("string")
            body = _unquote(t)
            if d is None:
                d = max((int(v) for v in re.findall(r"\bx(\d+)\b", body)),
                        default=0)
            try:
                c = parse_constraint(body, d)
            except ConstraintParseError as e:
                raise lx.error(f"bad constraint for dim {d}: {e}", t) from e
        else:
            c = dnf_true(d or 0)
        lx.expect("punct", ";")
        entries.append((tuple(key), c))
    lx.expect("punct", "}")
    lx.expect("eof")
    return name, DefinableRelation(arity, tuple(entries))


def format_rel(name: str, rel: DefinableRelation) -> str:
    lines = [f"rel {name} arity {rel.arity} {{"]
    for key, c in rel.entries:
        parts = ", ".join("eps" if k is None else k for k in key)
        if c.dim == 0:
            if not c.disjuncts:
                raise ValueError(
                    f"dim-0 entry {key} with empty constraint has no "
                    f"textual form")
            lines.append(f"  entry ({parts}) dim 0;")
        else:
            lines.append(
                f'  entry ({parts}) dim {c.dim} where '
                f'"{format_constraint(c)}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Timed-register PDA
# ---------------------------------------------------------------------------


_TRPDA_SECTIONS = ("states", "input", "stack", "initial", "final")


def _label_list(lx: _Lexer) -> tuple[str, ...]:
    lx.expect("punct", "[")
    out = []
    while not (lx.peek().kind == "punct" and lx.peek().text == "]"):
        if out:
            lx.expect("punct", ",")
        out.append(_label(lx))
    lx.expect("punct", "]")
    return tuple(out)


def parse_trpda(text: str) -> TrPDA:
    """Sections ``states``/``input``/``stack``/``initial``/``final`` in
    definable-set syntax followed by ``rules { rule pop=[..] in=L|eps
    push=[..] from=L to=L [where "C"]; ... }``.

    Rule constraint variables range over the from-state registers, the
    popped registers top first, the input registers, the to-state
    registers, and the pushed registers top last; declared component
    constraints are conjoined in.
    """
    lx = _Lexer(text)
    sections: dict[str, DefinableSet] = {}
    raw_rules: list[tuple[_Tok, dict]] = []
    while lx.peek().kind != "eof":
        t = lx.expect("name")
        if t.text in _TRPDA_SECTIONS:
            if t.text in sections:
                raise lx.error(f"duplicate section {t.text!r}", t)
            sections[t.text] = _set_body(lx)
        elif t.text == "rules":
            lx.expect("punct", "{")
            while not (lx.peek().kind == "punct" and lx.peek().text == "}"):
                start = lx.expect("name", "rule")
                attrs: dict = {}
                while not (lx.peek().kind == "punct"
                           and lx.peek().text == ";"):
                    a = lx.expect("name")
                    if a.text in attrs:
                        raise lx.error(f"duplicate attribute {a.text!r}", a)
                    if a.text in ("pop", "push"):
                        lx.expect("punct", "=")
                        attrs[a.text] = _label_list(lx)
                    elif a.text in ("from", "to"):
                        lx.expect("punct", "=")
                        attrs[a.text] = _label(lx)
                    elif a.text == "in":
                        lx.expect("punct", "=")
                        attrs["in"] = (None if lx.take_word("eps")
                                       else _label(lx))
                    elif a.text == "where":
                        attrs["where"] = lx.expect("string")
                    else:
                        raise lx.error(
                            f"unknown rule attribute {a.text!r}", a)
                lx.expect("punct", ";")
                for req in ("from", "to"):
                    if req not in attrs:
                        raise lx.error(
                            f"rule is missing {req}=...", start)
                raw_rules.append((start, attrs))
            lx.expect("punct", "}")
        else:
            raise lx.error(
                f"unknown section {t.text!r} (expected one of "
                f"{', '.join(_TRPDA_SECTIONS + ('rules',))})", t)
    for s in _TRPDA_SECTIONS:
        if s not in sections:
            raise lx.error(f"missing section {s!r}")

    dims = {
        "state": {l: d for l, d, _ in sections["states"].locations},
        "stack": {l: d for l, d, _ in sections["stack"].locations},
        "input": {l: d for l, d, _ in sections["input"].locations},
    }

    def dim_of(kind: str, label: str, tok: _Tok) -> int:
        try:
            return dims[kind][label]
        except KeyError:
            raise lx.error(f"unknown {kind} label {label!r}", tok) from None

    rules = []
    for tok, attrs in raw_rules:
        frm, to = attrs["from"], attrs["to"]
        pops = attrs.get("pop", ())
        pushes = attrs.get("push", ())
        inp = attrs.get("in")
        total = dim_of("state", frm, tok) + dim_of("state", to, tok)
        total += sum(dim_of("stack", s, tok) for s in pops + pushes)
        if inp is not None:
            total += dim_of("input", inp, tok)
        w = attrs.get("where")
        if w is None:
            if total:
                raise lx.error(
                    f"missing where clause for dim {total}", tok)
            c = dnf_true(0)
        else:
            try:
                c = parse_constraint(_unquote(w), total)
            except ConstraintParseError as e:
                raise lx.error(
                    f"bad constraint for dim {total}: {e}", w) from e
        rules.append(Rule(frm, tuple(pops), inp, to, tuple(pushes), c))
    return make_trpda(sections["states"], sections["input"],
                      sections["stack"], sections["initial"],
                      sections["final"], rules)


def format_trpda(a: TrPDA) -> str:
    """Labels that are not plain identifiers (as produced by the
    transformation pipeline) are renamed per kind; identifier-labeled
    automata print verbatim and round-trip exactly."""
    sn = _string_names([l for l, _, _ in a.states.locations])
    an = _string_names([l for l, _, _ in a.inputAlphabet.locations])
    kn = _string_names([l for l, _, _ in a.stackAlphabet.locations])
    out = []
    for sec, ds, names in (
            ("states", a.states, sn), ("input", a.inputAlphabet, an),
            ("stack", a.stackAlphabet, kn), ("initial", a.initial, sn),
            ("final", a.final, sn)):
        renamed = DefinableSet(
            tuple((names[l], d, c) for l, d, c in ds.locations))
        out.append(f"{sec} " + _fmt_set_body(renamed, ""))
    lines = ["rules {"]
    for r in a.rules:
        parts = [
            "rule",
            "pop=[" + ", ".join(kn[s] for s in r.pops) + "]",
            "in=" + (an[r.inp] if r.inp is not None else "eps"),
            "push=[" + ", ".join(kn[s] for s in r.pushes) + "]",
            f"from={sn[r.frm]}",
            f"to={sn[r.to]}",
        ]
        if r.constraint.dim:
            parts.append(f'where "{format_constraint(r.constraint)}"')
        lines.append("  " + " ".join(parts) + ";")
    lines.append("}")
    out.append("\n".join(lines))
    return "\n\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Timed context-free grammars
# ---------------------------------------------------------------------------


def parse_trcfg(text: str) -> TrCFG:
    """Sections ``nonterminals``/``alphabet`` in definable-set syntax,
    ``initial LABEL[(v1, ...)];`` naming the start element, and
    ``productions { prod lhs=L in=L|eps rhs=[..] [where "C"]; ... }``.

    Production constraint variables range over the lhs registers, the
    input registers, then the rhs registers in listed order.
    """
    lx = _Lexer(text)
    nonterminals: Optional[DefinableSet] = None
    alphabet: Optional[DefinableSet] = None
    start: Optional[tuple[_Tok, str, tuple[Fraction, ...]]] = None
    raw_prods: list[tuple[_Tok, dict]] = []
    while lx.peek().kind != "eof":
        t = lx.expect("name")
        if t.text == "nonterminals":
            nonterminals = _set_body(lx)
        elif t.text == "alphabet":
            alphabet = _set_body(lx)
        elif t.text == "initial":
            if start is not None:
                raise lx.error("duplicate initial declaration", t)
            lbl_tok = lx.peek()
            lbl = _label(lx)
            vals: list[Fraction] = []
            if lx.peek().kind == "punct" and lx.peek().text == "(":
                lx.next()
                while not (lx.peek().kind == "punct"
                           and lx.peek().text == ")"):
                    if vals:
                        lx.expect("punct", ",")
                    vals.append(_value(lx))
                lx.expect("punct", ")")
            lx.expect("punct", ";")
            start = (lbl_tok, lbl, tuple(vals))
        elif t.text == "productions":
            lx.expect("punct", "{")
            while not (lx.peek().kind == "punct" and lx.peek().text == "}"):
                p = lx.expect("name", "prod")
                attrs: dict = {}
                while not (lx.peek().kind == "punct"
                           and lx.peek().text == ";"):
                    a = lx.expect("name")
                    if a.text in attrs:
                        raise lx.error(f"duplicate attribute {a.text!r}", a)
                    if a.text == "lhs":
                        lx.expect("punct", "=")
                        attrs["lhs"] = _label(lx)
                    elif a.text == "in":
                        lx.expect("punct", "=")
                        attrs["in"] = (None if lx.take_word("eps")
                                       else _label(lx))
                    elif a.text == "rhs":
                        lx.expect("punct", "=")
                        attrs["rhs"] = _label_list(lx)
                    elif a.text == "where":
                        attrs["where"] = lx.expect("string")
                    else:
                        raise lx.error(
                            f"unknown production attribute {a.text!r}", a)
                lx.expect("punct", ";")
                if "lhs" not in attrs:
                    raise lx.error("production is missing lhs=...", p)
                raw_prods.append((p, attrs))
            lx.expect("punct", "}")
        else:
            raise lx.error(
                f"unknown section {t.text!r} (expected nonterminals, "
                f"alphabet, initial, or productions)", t)
    if nonterminals is None:
        raise lx.error("missing section 'nonterminals'")
    if alphabet is None:
        raise lx.error("missing section 'alphabet'")
    if start is None:
        raise lx.error("missing initial declaration")

    ndims = {l: d for l, d, _ in nonterminals.locations}
    adims = {l: d for l, d, _ in alphabet.locations}
    lbl_tok, lbl, vals = start
    if lbl not in ndims:
        raise lx.error(f"unknown nonterminal {lbl!r}", lbl_tok)
    if len(vals) != ndims[lbl]:
        raise lx.error(
            f"initial element carries {len(vals)} values for dim "
            f"{ndims[lbl]}", lbl_tok)

    prods = []
    for tok, attrs in raw_prods:
        lhs = attrs["lhs"]
        rhs = attrs.get("rhs", ())
        inp = attrs.get("in")
        if lhs not in ndims:
            raise lx.error(f"unknown nonterminal {lhs!r}", tok)
        total = ndims[lhs]
        if inp is not None:
            if inp not in adims:
                raise lx.error(f"unknown letter {inp!r}", tok)
            total += adims[inp]
        for s in rhs:
            if s not in ndims:
                raise lx.error(f"unknown nonterminal {s!r}", tok)
            total += ndims[s]
        w = attrs.get("where")
        if w is None:
            if total:
                raise lx.error(
                    f"missing where clause for dim {total}", tok)
            c = dnf_true(0)
        else:
            try:
                c = parse_constraint(_unquote(w), total)
            except ConstraintParseError as e:
                raise lx.error(
                    f"bad constraint for dim {total}: {e}", w) from e
        prods.append(Production(lhs, inp, tuple(rhs), c))
    return TrCFG(nonterminals, Element(lbl, vals), alphabet, tuple(prods))


def format_trcfg(g: TrCFG) -> str:
    out = [
        "nonterminals " + _fmt_set_body(g.symbols, ""),
        "alphabet " + _fmt_set_body(g.alphabet, ""),
    ]
    if g.start.point:
        vals = ", ".join(str(v) for v in g.start.point)
        out.append(f"initial {g.start.label}({vals});")
    else:
        out.append(f"initial {g.start.label};")
    lines = ["productions {"]
    for p in g.productions:
        parts = [
            "prod",
            f"lhs={p.lhs}",
            "in=" + (p.inp if p.inp is not None else "eps"),
            "rhs=[" + ", ".join(p.rhs) + "]",
        ]
        if p.constraint.dim:
            parts.append(f'where "{format_constraint(p.constraint)}"')
        lines.append("  " + " ".join(parts) + ";")
    lines.append("}")
    out.append("\n".join(lines))
    return "\n\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Timed words
# ---------------------------------------------------------------------------


def parse_word(text: str) -> TimedWord:
    """``word { (LBL; v1, v2, ...) (LBL) ... }`` with exact decimal or
    fraction values."""
    lx = _Lexer(text)
    lx.expect("name", "word")
    lx.expect("punct", "{")
    letters = []
    while not (lx.peek().kind == "punct" and lx.peek().text == "}"):
        lx.expect("punct", "(")
        label = _label(lx)
        vals: list[Fraction] = []
        if lx.peek().kind == "punct" and lx.peek().text == ";":
            lx.next()
            while not (lx.peek().kind == "punct" and lx.peek().text == ")"):
                if vals:
                    lx.expect("punct", ",")
                vals.append(_value(lx))
        lx.expect("punct", ")")
        letters.append(Element(label, tuple(vals)))
    lx.expect("punct", "}")
    lx.expect("eof")
    return TimedWord(tuple(letters))


def format_word(w: TimedWord) -> str:
    parts = []
    for e in w.letters:
        if e.point:
            parts.append(f"({e.label}; " + ", ".join(
                str(v) for v in e.point) + ")")
        else:
            parts.append(f"({e.label})")
    return "word { " + " ".join(parts) + " }\n"


# ---------------------------------------------------------------------------
# Dense-timed PDA
# ---------------------------------------------------------------------------


def _name_seq(lx: _Lexer, what: str) -> list[str]:
    """One or more names, separated by whitespace or commas, up to ';'."""
    out = [_label(lx, what)]
    while True:
        if lx.peek().kind == "punct" and lx.peek().text == ",":
            lx.next()
            out.append(_label(lx, what))
        elif lx.peek().kind == "name":
            out.append(_label(lx, what))
        else:
            return out


def parse_dtpda(text: str) -> DtPDA:
    """``dtpda { clocks ..; loc ..; init L; final ..; input ..; stack ..;
    rule from=L to=L in=L|eps [guard "G"] [reset [..]] op
    nop|push(S[,"P"])|pop(S[,"P"]); }``

    Locations, letters, and stack symbols referenced by rules are
    declared implicitly; explicit statements fix the order and allow
    unused symbols.  Guards and push/pop constraints use clock-atom
    syntax (``x OP k``, ``x - y OP k``, age ``z``).
    """
    lx = _Lexer(text)
    lx.expect("name", "dtpda")
    lx.expect("punct", "{")
    clocks: list[str] = []
    locs: list[str] = []
    inputs: list[str] = []
    stack: list[str] = []
    init: Optional[str] = None
    finals: list[str] = []
    raw_rules: list[tuple[_Tok, dict]] = []

    def note(seq: list[str], items: Sequence[str]) -> None:
        for x in items:
            if x not in seq:
                seq.append(x)

    while not (lx.peek().kind == "punct" and lx.peek().text == "}"):
        t = lx.expect("name")
        if t.text == "clocks":
            note(clocks, _name_seq(lx, "clock"))
            lx.expect("punct", ";")
        elif t.text == "loc":
            note(locs, _name_seq(lx, "location"))
            lx.expect("punct", ";")
        elif t.text == "init":
            if init is not None:
                raise lx.error("duplicate init declaration", t)
            init = _label(lx, "location")
            note(locs, [init])
            lx.expect("punct", ";")
        elif t.text == "final":
            fs = _name_seq(lx, "location")
            note(finals, fs)
            note(locs, fs)
            lx.expect("punct", ";")
        elif t.text == "input":
            note(inputs, _name_seq(lx, "letter"))
            lx.expect("punct", ";")
        elif t.text == "stack":
            note(stack, _name_seq(lx, "stack symbol"))
            lx.expect("punct", ";")
        elif t.text == "rule":
            attrs: dict = {}
            while not (lx.peek().kind == "punct" and lx.peek().text == ";"):
                a = lx.expect("name")
                if a.text in attrs:
                    raise lx.error(f"duplicate attribute {a.text!r}", a)
                if a.text in ("from", "to"):
                    lx.expect("punct", "=")
                    attrs[a.text] = _label(lx, "location")
                elif a.text == "in":
                    lx.expect("punct", "=")
                    attrs["in"] = (None if lx.take_word("eps")
                                   else _label(lx, "letter"))
                elif a.text == "guard":
                    attrs["guard"] = lx.expect("string")
                elif a.text == "reset":
                    lx.expect("punct", "[")
                    rs = []
                    while not (lx.peek().kind == "punct"
                               and lx.peek().text == "]"):
                        if rs and lx.peek().kind == "punct" \
                                and lx.peek().text == ",":
                            lx.next()
                        rs.append(_label(lx, "clock"))
                    lx.expect("punct", "]")
                    attrs["reset"] = tuple(rs)
                elif a.text == "op":
                    o = lx.expect("name")
                    if o.text == "nop":
                        attrs["op"] = ("nop",)
                    elif o.text in ("push", "pop"):
                        lx.expect("punct", "(")
                        sym = _label(lx, "stack symbol")
                        psi: Optional[_Tok] = None
                        if lx.peek().kind == "punct" \
                                and lx.peek().text == ",":
                            lx.next()
                            psi = lx.expect("string")
                        lx.expect("punct", ")")
                        attrs["op"] = (o.text, sym, psi)
                    else:
                        raise lx.error(
                            f"unknown operation {o.text!r} (expected nop, "
                            f"push, or pop)", o)
                else:
                    raise lx.error(f"unknown rule attribute {a.text!r}", a)
            lx.expect("punct", ";")
            for req in ("from", "to"):
                if req not in attrs:
                    raise lx.error(f"rule is missing {req}=...", t)
            note(locs, [attrs["from"], attrs["to"]])
            if attrs.get("in") is not None:
                note(inputs, [attrs["in"]])
            op = attrs.get("op", ("nop",))
            if op[0] in ("push", "pop"):
                note(stack, [op[1]])
            raw_rules.append((t, attrs))
        else:
            raise lx.error(f"unknown statement {t.text!r}", t)
    lx.expect("punct", "}")
    lx.expect("eof")
    if init is None:
        raise lx.error("missing init declaration")

    def atoms(tok: Optional[_Tok], allow_age: bool):
        if tok is None:
            return ()
        try:
            return parse_clock_constraint(
                _unquote(tok), clocks, allowAge=allow_age)
        except ClockConstraintError as e:
            raise lx.error(str(e), tok) from e

    rules = []
    for tok, attrs in raw_rules:
        guard = atoms(attrs.get("guard"), allow_age=False)
        op = attrs.get("op", ("nop",))
        if op[0] == "nop":
            built = NOP
        else:
            psi = atoms(op[2], allow_age=True)
            built = (push_op if op[0] == "push" else pop_op)(op[1], psi)
        rules.append(DtRule(attrs["from"], attrs.get("in"), guard,
                            frozenset(attrs.get("reset", ())), built,
                            attrs["to"]))
    try:
        return make_dtpda(locs, inputs, stack, clocks, rules, init, finals)
    except ValueError as e:
        raise lx.error(str(e), lx.peek()) from e


def _string_names(objs: Sequence) -> dict:
    """Deterministic identifier for each distinct label object."""
    out: dict = {}
    used: set[str] = set()
    for o in objs:
        if o in out:
            continue
        if isinstance(o, str) and _NAME_RE.fullmatch(o) \
                and not o.startswith("__"):
            base = o
        else:
            base = re.sub(r"\W+", "_", str(o)).strip("_") or "s"
            if not _NAME_RE.fullmatch(base) or base.startswith("__"):
                base = "s" + base
            if not _NAME_RE.fullmatch(base):
                base = "s"
        name = base
        n = 1
        while name in used:
            n += 1
            name = f"{base}_{n}"
        used.add(name)
        out[o] = name
    return out


def format_dtpda(a: DtPDA) -> str:
    """Print with every location, letter, and symbol declared up front.

    Labels produced by transformations (tuples, untiming states) are
    renamed to fresh identifiers; string-labeled models print verbatim.
    """
    locn = _string_names(a.locations)
    symn = _string_names(a.stack)
    clkn = _string_names(a.clocks)
    lines = ["dtpda {"]
    if a.clocks:
        lines.append("  clocks " + " ".join(clkn[c] for c in a.clocks) + ";")
    for l in a.locations:
        lines.append(f"  loc {locn[l]};")
    lines.append(f"  init {locn[a.initial]};")
    for l in sorted(locn[f] for f in a.finals):
        lines.append(f"  final {l};")
    for i in a.inputs:
        lines.append(f"  input {i};")
    for s in a.stack:
        lines.append(f"  stack {symn[s]};")

    def ren_atoms(atoms):
        parts = []
        for at in atoms:
            lhs = clkn.get(at.lhs, at.lhs)
            term = lhs if at.rhs is None else f"{lhs} - {clkn[at.rhs]}"
            parts.append(f"{term} {at.op} {at.k}")
        return " & ".join(parts)

    for r in a.rules:
        parts = [
            "rule",
            f"from={locn[r.frm]}",
            f"to={locn[r.to]}",
            "in=" + (r.inp if r.inp is not None else "eps"),
        ]
        if r.guard:
            parts.append(f'guard "{ren_atoms(r.guard)}"')
        if r.resets:
            parts.append(
                "reset [" + ", ".join(sorted(clkn[c] for c in r.resets)) + "]")
        if r.op == NOP:
            parts.append("op nop")
        else:
            kind, sym, psi = r.op
            if psi:
                parts.append(f'op {kind}({symn[sym]}, "{ren_atoms(psi)}")')
            else:
                parts.append(f"op {kind}({symn[sym]})")
        lines.append("  " + " ".join(parts) + ";")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Equation systems (line-oriented)
# ---------------------------------------------------------------------------


_EQ_LINE = re.compile(r"([A-Za-z_]\w*)\s*>=\s*(.+?)\s*\Z")
_EQ_CONST = re.compile(r"\{\s*(-?\d+)\s*\}\Z")
_EQ_ADD = re.compile(r"([A-Za-z_]\w*)\s*\+\s*([A-Za-z_]\w*)\Z")
_EQ_INTER = re.compile(r"([A-Za-z_]\w*)\s*\^\s*\{\s*0\s*\}\Z")
_EQ_UNION = re.compile(r"([A-Za-z_]\w*)\s*\|\s*([A-Za-z_]\w*)\Z")
_EQ_INTERVAL = re.compile(r"\[\s*(<|>)?\s*(-?\d+)\s*\]\Z")


def parse_eq(text: str) -> intsets.EqSystem:
    """One inclusion per line: ``X >= {K}``, ``X >= Y + Z``,
    ``X >= Y ^ {0}``, ``X >= Y | Z``, or ``X >= [m] / [<m] / [>m]``.

    ``#`` starts a comment; a leading ``# vars: ...`` comment (always
    written by format_eq) fixes the variable order and may declare
    ``__``-prefixed names, which are otherwise reserved for the
    normalization gadgets.
    """
    declared: list[str] = []
    raw: list[tuple[str, tuple]] = []
    mentioned: list[str] = []
    seen_any = False

    def mention(v: str, ln: int, col: int) -> str:
        if v.startswith("__") and v not in declared:
            raise FormatError(
                f"name {v!r} uses the reserved '__' prefix and is not in "
                f"the # vars: header", ln, col)
        if v not in mentioned:
            mentioned.append(v)
        return v

    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if not seen_any and stripped.startswith("# vars:") \
                    and not declared:
                for v in stripped[len("# vars:"):].split():
                    if not _NAME_RE.fullmatch(v):
                        raise FormatError(
                            f"bad variable name {v!r} in # vars: header",
                            ln, 1)
                    declared.append(v)
            continue
        seen_any = True
        m = _EQ_LINE.match(stripped)
        if m is None:
            raise FormatError(
                "expected an inclusion 'X >= ...'", ln,
                len(line) - len(line.lstrip()) + 1)
        target, rhs = m.group(1), m.group(2)
        col = line.index(target) + 1
        mention(target, ln, col)
        rcol = line.index(rhs, col) + 1 if rhs in line else col
        if (mc := _EQ_CONST.match(rhs)) is not None:
            expr: tuple = ("const", int(mc.group(1)))
        elif (ma := _EQ_ADD.match(rhs)) is not None:
            expr = ("add",
                    ("var", mention(ma.group(1), ln, rcol)),
                    ("var", mention(ma.group(2), ln, rcol)))
        elif (mi := _EQ_INTER.match(rhs)) is not None:
            expr = ("inter0", ("var", mention(mi.group(1), ln, rcol)))
        elif (mu := _EQ_UNION.match(rhs)) is not None:
            expr = ("union",
                    ("var", mention(mu.group(1), ln, rcol)),
                    ("var", mention(mu.group(2), ln, rcol)))
        elif (mv := _EQ_INTERVAL.match(rhs)) is not None:
            sign, k = mv.group(1), int(mv.group(2))
            expr = ("const", k) if sign is None else (
                ("below", k) if sign == "<" else ("above", k))
        else:
            raise FormatError(
                f"unrecognized right-hand side {rhs!r}", ln, rcol)
        raw.append((target, expr))
    order = declared + [v for v in mentioned if v not in declared]
    return intsets.normalize(raw, variables=order)


def format_eq(s: intsets.EqSystem,
              notes: Sequence[tuple[str, str]] = ()) -> str:
    """Inverse of parse_eq on binary systems; ``notes`` renders extra
    ``# NAME: text`` comment lines after the variable header."""
    lines = ["# vars: " + " ".join(s.variables)]
    for name, note in notes:
        lines.append(f"# {name}: {note}")
    for inc in s.inclusions:
        if isinstance(inc, intsets.Const):
            lines.append(f"{inc.var} >= {{{inc.value}}}")
        elif isinstance(inc, intsets.Inter):
            lines.append(f"{inc.var} >= {inc.arg} ^ {{0}}")
        else:
            lines.append(f"{inc.var} >= {inc.left} + {inc.right}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Minsky machines (line-oriented)
# ---------------------------------------------------------------------------


_MM_LINE = re.compile(
    r"(\d+)\s+(inc1|inc2|dec1|dec2|jz1|jz2|goto|halt)(?:\s+(\d+))?\Z")


def parse_minsky(text: str) -> MinskyMachine:
    """Numbered lines ``N OP [TARGET]`` with N running 1, 2, ...;
    ``jz1``/``jz2``/``goto`` take a 1-based target line."""
    instrs: list[MinskyInstr] = []
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _MM_LINE.match(stripped)
        if m is None:
            raise FormatError(
                "expected 'N OP [TARGET]'", ln,
                len(line) - len(line.lstrip()) + 1)
        num, op, arg = int(m.group(1)), m.group(2), m.group(3)
        if num != len(instrs) + 1:
            raise FormatError(
                f"instruction numbered {num}, expected {len(instrs) + 1}",
                ln, 1)
        needs_arg = op in ("jz1", "jz2", "goto")
        if needs_arg and arg is None:
            raise FormatError(f"{op} needs a target line", ln, 1)
        if not needs_arg and arg is not None:
            raise FormatError(f"{op} takes no target", ln, 1)
        instrs.append(MinskyInstr(op, int(arg) if arg is not None else None))
    if not instrs:
        raise FormatError("empty program", 1, 1)
    try:
        return MinskyMachine(tuple(instrs))
    except ValueError as e:
        raise FormatError(str(e), 1, 1) from e


def format_minsky(m: MinskyMachine) -> str:
    lines = []
    for i, ins in enumerate(m.instrs, start=1):
        if ins.arg is None:
            lines.append(f"{i} {ins.op}")
        else:
            lines.append(f"{i} {ins.op} {ins.arg}")
    return "\n".join(lines) + "\n"


EXT_PARSERS: dict[str, Callable] = {
    ".set": parse_set,
    ".rel": parse_rel,
    ".trpda": parse_trpda,
    ".trcfg": parse_trcfg,
    ".word": parse_word,
    ".dtpda": parse_dtpda,
    ".eq": parse_eq,
    ".mm": parse_minsky,
}
