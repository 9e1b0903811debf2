"""Command-line interface for the timed-pushdown toolkit.

Every run produces one RunReport: a human-readable text rendering by
default, or a single stable JSON document with ``--json``.  Reports for
identical inputs and seed are identical except for the ``timing_ms``
field.  Exit status: 0 when the command decided its question (or a
transformation succeeded), 2 when the verdict is Unknown or a bounded
search was inconclusive, 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import intsets
from .automata import (
    Nonempty,
    TrPDA,
    UNKNOWN_AT_BOUND,
    accepts,
    bounded_empty_oracle,
    encode_minsky,
    short_to_trpda,
    to_short_form,
    validate,
)
from .constraints import (
    ConstraintParseError,
    dnf_of_zone,
    format_constraint,
    parse_constraint,
)
from .definable import OrbitInfiniteError, is_orbit_finite, orbits
from .dtpda import dtpda_to_trpda, simplify, untime_stack
from .formats import EXT_PARSERS, FormatError, format_eq, format_trpda, format_word, format_dtpda
from .orbits import NFComponent, TimelessMark, normal_form, project
from .reachability import (
    Emptiness,
    _preprocess,
    build_equations,
    cfg_nonempty,
    trcfg_untiming,
    untiming_pda,
    untimed_emptiness,
)

SCHEMA = "timedpda-report/1"

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_UNKNOWN = 2


class _CliError(Exception):
    pass


def _load(path: str, expect_ext: str):
    p = Path(path)
    if p.suffix != expect_ext:
        raise _CliError(f"{path}: expected a {expect_ext} file")
    try:
        text = p.read_text()
    except OSError as e:
        raise _CliError(f"{path}: {e.strerror or e}") from e
    try:
        return EXT_PARSERS[expect_ext](text)
    except FormatError as e:
        raise _CliError(f"{path}: {e}") from e
    except ConstraintParseError as e:
        raise _CliError(f"{path}: {e}") from e


def _nf_text(u: intsets.IntSetNF) -> str:
    parts = []
    if u.finite:
        parts.append("{" + ", ".join(str(v) for v in sorted(u.finite)) + "}")
    parts.extend(f"{{{a} + {p}n}}" for a, p in u.right)
    parts.extend(f"{{{a} - {p}n}}" for a, p in u.left)
    parts.extend(f"{{{a} + {g}Z}}" for a, g in u.cosets)
    return " | ".join(parts) if parts else "{}"


def _component_dict(comp: NFComponent) -> dict:
    return {
        "floors": list(comp.base.floors),
        "classes": list(comp.base.classes),
        "extended_pairs": sorted(
            [i + 1, j + 1] for i, j in comp.extended_pairs),
        "constraint": format_constraint(dnf_of_zone(comp.zone())),
    }


def _element_dict(e) -> dict:
    return {"label": str(e.label), "point": [str(v) for v in e.point]}


def _witness_dict(res: Nonempty) -> dict:
    return {
        "word": format_word(res.word).strip(),
        "run": [
            {
                "rule": step.rule_index,
                "state": _element_dict(step.state),
                "letter": (None if step.letter is None
                           else _element_dict(step.letter)),
            }
            for step in res.run
        ],
    }


def _emit(args, report: dict, human_lines: list[str], status: int) -> int:
    report["schema"] = SCHEMA
    report["command"] = [args.cmd] + list(getattr(args, "_echo", []))
    report["seed"] = args.seed
    report["timing_ms"] = round((time.perf_counter() - args._t0) * 1000, 3)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)
    return status


def _write_output(args, text: str, human_lines: list[str],
                  report: dict) -> None:
    if args.output:
        Path(args.output).write_text(text)
        report["output_path"] = args.output
        human_lines.append(f"wrote {args.output}")
    else:
        report["output"] = text
        if not args.json:
            human_lines.append(text.rstrip("\n"))


def _verdict_status(verdict: str) -> int:
    if verdict in ("Unknown", "UnknownAtBound", "NoRunUpToBound"):
        return _EXIT_UNKNOWN
    return _EXIT_OK


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_orbits(args) -> int:
    name, ds = _load(args.file, ".set")
    bound = is_orbit_finite(ds)
    report: dict = {"set": name}
    lines = []
    if bound is None:
        report["verdict"] = "OrbitInfinite"
        lines.append(f"{name}: orbit-infinite (a location constraint has "
                     f"unbounded span)")
        return _emit(args, report, lines, _EXIT_OK)
    items = []
    for label, enc in orbits(ds):
        if isinstance(enc, TimelessMark):
            items.append({"label": label, "timeless": True})
        else:
            items.append({
                "label": label,
                "floors": list(enc.floors),
                "classes": list(enc.classes),
                "member": [str(v) for v in enc.member_point()],
            })
    report.update(verdict="OrbitFinite", span_bound=bound,
                  orbit_count=len(items), orbits=items)
    lines.append(f"{name}: orbit-finite, span bound {bound}, "
                 f"{len(items)} orbits")
    for it in items:
        if it.get("timeless"):
            lines.append(f"  {it['label']}: timeless")
        else:
            lines.append(
                f"  {it['label']}: floors={tuple(it['floors'])} "
                f"classes={tuple(it['classes'])} "
                f"member=({', '.join(it['member'])})")
    return _emit(args, report, lines, _EXIT_OK)


def _parse_inline_constraint(text: str, dim: int):
    try:
        return parse_constraint(text, dim)
    except ConstraintParseError as e:
        raise _CliError(str(e)) from e


def _cmd_normal_form(args) -> int:
    c = _parse_inline_constraint(args.constraint, args.dim)
    comps = normal_form(c)
    report = {
        "dim": args.dim,
        "component_count": len(comps),
        "components": [_component_dict(k) for k in comps],
    }
    lines = [f"{len(comps)} normal-form components"]
    for k in report["components"]:
        tag = (f" extended={k['extended_pairs']}"
               if k["extended_pairs"] else "")
        lines.append(f"  floors={tuple(k['floors'])} "
                     f"classes={tuple(k['classes'])}{tag}")
        lines.append(f"    {k['constraint']}")
    return _emit(args, report, lines, _EXIT_OK)


def _cmd_project(args) -> int:
    c = _parse_inline_constraint(args.constraint, args.dim)
    try:
        keep = sorted({int(v) for v in args.keep.split(",") if v.strip()})
    except ValueError:
        raise _CliError(f"--keep wants comma-separated indices, "
                        f"got {args.keep!r}") from None
    if any(not 1 <= v <= args.dim for v in keep):
        raise _CliError(f"--keep indices must lie in 1..{args.dim}")
    comps = project(normal_form(c), [v - 1 for v in keep])
    report = {
        "dim": args.dim,
        "keep": keep,
        "component_count": len(comps),
        "components": [_component_dict(k) for k in comps],
    }
    lines = [f"projection onto x{',x'.join(str(v) for v in keep)}: "
             f"{len(comps)} components" if keep else
             "projection onto no coordinates: "
             + ("nonempty (timeless point)" if comps else "empty")]
    for k in report["components"]:
        tag = (f" extended={k['extended_pairs']}"
               if k["extended_pairs"] else "")
        lines.append(f"  floors={tuple(k['floors'])} "
                     f"classes={tuple(k['classes'])}{tag}")
        lines.append(f"    {k['constraint']}")
    return _emit(args, report, lines, _EXIT_OK)


def _check_equations(a: TrPDA, args, report: dict, lines: list[str]) -> str:
    rep = validate(a)
    if not rep.orbit_finite_class:
        raise _CliError(
            "not in the orbit-finite class: "
            + "; ".join(rep.failures + rep.rule_errors))
    system, vm = build_equations(
        _preprocess(to_short_form(a), normal_rules=False))
    budget = max(args.budget, 4 * len(system.inclusions) + 100)
    verdict = Emptiness.EMPTY
    for v in vm.initial_final:
        r = intsets.nonempty(system, v, budget=budget, depth=args.depth)
        if r == intsets.TRUE:
            verdict = Emptiness.NONEMPTY
            break
        if r == intsets.UNKNOWN:
            verdict = Emptiness.UNKNOWN
    report["stats"] = {
        "variables": len(system.variables),
        "inclusions": len(system.inclusions),
        "pair_orbit_vars": len(vm.orbit_of_var),
        "initial_final_vars": len(vm.initial_final),
        "budget": budget,
        "depth": args.depth,
    }
    lines.append(
        f"equation system: {len(system.variables)} variables, "
        f"{len(system.inclusions)} inclusions, "
        f"{len(vm.orbit_of_var)} pair-orbit variables")
    return verdict.value


def _cmd_check(args) -> int:
    a = _load(args.file, ".trpda")
    report: dict = {"route": args.route}
    lines: list[str] = []
    if args.route == "equations":
        verdict = _check_equations(a, args, report, lines)
    elif args.route == "orbit-pda":
        try:
            p = untiming_pda(a)
        except (ValueError, OrbitInfiniteError) as e:
            raise _CliError(str(e)) from e
        verdict = (Emptiness.NONEMPTY if untimed_emptiness(p)
                   else Emptiness.EMPTY).value
        report["stats"] = {
            "untimed_states": len(p.states),
            "untimed_stack": len(p.stack),
            "untimed_rules": len(p.rules),
        }
        lines.append(f"orbit PDA: {len(p.states)} states, "
                     f"{len(p.stack)} stack symbols, {len(p.rules)} rules")
    else:
        res = bounded_empty_oracle(a, args.max_steps)
        if isinstance(res, Nonempty):
            verdict = "Nonempty"
            report["witness"] = _witness_dict(res)
            lines.append(f"witness word: {report['witness']['word']}")
            lines.append(f"witness run: {len(res.run)} steps")
        else:
            verdict = "NoRunUpToBound"
        report["stats"] = {"max_steps": args.max_steps}
    report["verdict"] = verdict
    lines.insert(0, f"verdict: {verdict}")
    return _emit(args, report, lines, _verdict_status(verdict))


def _cmd_untime_stack(args) -> int:
    a = _load(args.file, ".dtpda")
    out = untime_stack(simplify(a))
    report: dict = {
        "stats": {
            "locations": len(out.locations),
            "stack_symbols": len(out.stack),
            "rules": len(out.rules),
        },
    }
    lines = [f"timeless-stack dtPDA: {len(out.locations)} locations, "
             f"{len(out.stack)} stack symbols, {len(out.rules)} rules"]
    _write_output(args, format_dtpda(out), lines, report)
    return _emit(args, report, lines, _EXIT_OK)


def _cmd_to_trpda(args) -> int:
    a = _load(args.file, ".dtpda")
    out = dtpda_to_trpda(untime_stack(simplify(a)))
    report: dict = {
        "stats": {
            "states": len(out.states.locations),
            "stack_symbols": len(out.stackAlphabet.locations),
            "rules": len(out.rules),
        },
    }
    lines = [f"trPDA: {len(out.states.locations)} states, "
             f"{len(out.stackAlphabet.locations)} stack symbols, "
             f"{len(out.rules)} rules"]
    _write_output(args, format_trpda(out), lines, report)
    return _emit(args, report, lines, _EXIT_OK)


def _cmd_short_form(args) -> int:
    a = _load(args.file, ".trpda")
    s = to_short_form(a)
    out = short_to_trpda(s)
    report: dict = {
        "stats": {
            "states": len(out.states.locations),
            "push_rules": len(s.push.entries),
            "pop_rules": len(s.pop.entries),
            "nop_rules": len(s.nop.entries),
        },
    }
    lines = [f"short form: {len(out.states.locations)} states, "
             f"{len(s.push.entries)} push rules, {len(s.pop.entries)} pop "
             f"rules, {len(s.nop.entries)} nop rules"]
    _write_output(args, format_trpda(out), lines, report)
    return _emit(args, report, lines, _EXIT_OK)


def _cmd_untiming_cfg(args) -> int:
    g = _load(args.file, ".trcfg")
    try:
        c = trcfg_untiming(g)
    except OrbitInfiniteError as e:
        raise _CliError(str(e)) from e
    verdict = "Nonempty" if cfg_nonempty(c) else "Empty"
    prod_lines = []
    for p in c.productions:
        rhs = " ".join(p.rhs) if p.rhs else "eps"
        letter = p.letter if p.letter is not None else "eps"
        prod_lines.append(f"{p.lhs} -> [{letter}] {rhs}")
    report: dict = {
        "verdict": verdict,
        "stats": {
            "nonterminals": len(c.nonterminals),
            "terminals": len(c.terminals),
            "productions": len(c.productions),
        },
        "start": c.start,
        "productions": prod_lines,
    }
    lines = [f"verdict: {verdict}",
             f"orbit CFG: {len(c.nonterminals)} nonterminals, "
             f"{len(c.terminals)} terminals, "
             f"{len(c.productions)} productions, start {c.start}"]
    lines.extend("  " + pl for pl in prod_lines)
    return _emit(args, report, lines, _EXIT_OK)


def _cmd_to_equations(args) -> int:
    a = _load(args.file, ".trpda")
    rep = validate(a)
    if not rep.orbit_finite_class:
        raise _CliError(
            "not in the orbit-finite class: "
            + "; ".join(rep.failures + rep.rule_errors))
    system, vm = build_equations(
        _preprocess(to_short_form(a), normal_rules=False))
    inifin = set(vm.initial_final)
    notes = []
    for v in system.variables:
        o = vm.orbit_of_var.get(v)
        if o is None:
            continue
        text = (f"pair orbit left={o.left} right={o.right} ldim={o.ldim} "
                f"floors={o.mc.floors} classes={o.mc.classes}")
        if v in inifin:
            text += " initial-final"
        notes.append((v, text))
    for tag, v in sorted(vm.interval_vars.items(), key=lambda kv: kv[1]):
        notes.append((v, f"interval {tag}"))
    report: dict = {
        "stats": {
            "variables": len(system.variables),
            "inclusions": len(system.inclusions),
            "pair_orbit_vars": len(vm.orbit_of_var),
            "initial_final_vars": len(vm.initial_final),
        },
        "initial_final": list(vm.initial_final),
    }
    lines = [f"equation system: {len(system.variables)} variables, "
             f"{len(system.inclusions)} inclusions; initial-final: "
             + (", ".join(vm.initial_final) or "none")]
    _write_output(args, format_eq(system, notes), lines, report)
    return _emit(args, report, lines, _EXIT_OK)


def _cmd_solve(args) -> int:
    s = _load(args.file, ".eq")
    try:
        s.require_var(args.var)
    except ValueError:
        raise _CliError(
            f"unknown variable {args.var!r}; the system defines: "
            + ", ".join(v for v in s.variables
                        if not v.startswith("__"))) from None
    report: dict = {"var": args.var, "backend": args.backend}
    lines: list[str] = []
    if args.backend == "accel":
        nu, exact = intsets.kleene_solve(s, budget=args.budget)
        desc = _nf_text(nu[args.var])
        has_inter = any(isinstance(i, intsets.Inter) for i in s.inclusions)
        v = intsets.nonempty(s, args.var, budget=args.budget,
                             depth=args.depth)
        verdict = {intsets.TRUE: "Nonempty", intsets.FALSE: "Empty",
                   intsets.UNKNOWN: "Unknown"}[v]
        report.update(verdict=verdict, solution=desc, exact=exact,
                      has_intersections=has_inter)
        lines.append(f"verdict: {verdict}")
        lines.append(f"{args.var} = {desc}"
                     + ("" if exact else "  (under-approximation)"))
    else:
        arr = intsets.derivation_oracle(s, args.var, args.depth)
        vals = sorted(int(v) for v in arr)
        verdict = "Nonempty" if vals else "Unknown"
        report.update(verdict=verdict, depth=args.depth,
                      value_count=len(vals),
                      values=vals[:50])
        lines.append(f"verdict: {verdict}")
        shown = ", ".join(str(v) for v in vals[:50])
        more = "" if len(vals) <= 50 else f", ... ({len(vals)} total)"
        lines.append(f"{args.var} ⊇ {{{shown}{more}}} at depth {args.depth}")
    return _emit(args, report, lines, _verdict_status(verdict))


def _cmd_member(args) -> int:
    s = _load(args.file, ".eq")
    try:
        v = intsets.membership(s, args.var, args.value,
                               backend=args.backend, budget=args.budget,
                               depth=args.depth)
    except ValueError:
        raise _CliError(f"unknown variable {args.var!r}") from None
    verdict = {intsets.TRUE: "True", intsets.FALSE: "False",
               intsets.UNKNOWN: "Unknown"}[v]
    report = {"var": args.var, "value": args.value,
              "backend": args.backend, "verdict": verdict}
    lines = [f"member {args.value} of {args.var}: {verdict}"]
    return _emit(args, report, lines, _verdict_status(verdict))


def _cmd_simulate(args) -> int:
    a = _load(args.automaton, ".trpda")
    w = _load(args.word, ".word")
    res = accepts(a, w, maxSilent=args.max_silent)
    if res is UNKNOWN_AT_BOUND:
        verdict = "UnknownAtBound"
    else:
        verdict = "Accepted" if res else "Rejected"
    report = {"verdict": verdict, "word": format_word(w).strip(),
              "max_silent": args.max_silent}
    lines = [f"verdict: {verdict}"]
    return _emit(args, report, lines, _verdict_status(verdict))


def _cmd_encode_minsky(args) -> int:
    m = _load(args.file, ".mm")
    out = encode_minsky(m)
    report: dict = {
        "stats": {
            "instructions": len(m.instrs),
            "states": len(out.states.locations),
            "rules": len(out.rules),
        },
    }
    lines = [f"trPDA: {len(out.states.locations)} states, "
             f"{len(out.rules)} rules "
             f"(from {len(m.instrs)} instructions)"]
    _write_output(args, format_trpda(out), lines, report)
    return _emit(args, report, lines, _EXIT_OK)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="timedpda",
        description="Timed-register pushdown automata: transformations "
                    "and emptiness decisions.")
    ap.add_argument("--seed", type=int, default=0,
                    help="seed for any sampling (reports echo it)")
    ap.add_argument("--json", action="store_true",
                    help="emit the machine-readable report instead of text")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(_fn=fn)
        return p

    p = add("orbits", _cmd_orbits, "enumerate the orbits of a definable set")
    p.add_argument("file")

    p = add("normal-form", _cmd_normal_form,
            "decompose a constraint into normal-form components")
    p.add_argument("constraint")
    p.add_argument("--dim", type=int, required=True)

    p = add("project", _cmd_project,
            "project a constraint onto a subset of its variables")
    p.add_argument("constraint")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--keep", required=True,
                   help="comma-separated 1-based variable indices")

    p = add("check", _cmd_check, "decide language emptiness")
    p.add_argument("file")
    p.add_argument("--route", choices=("equations", "orbit-pda", "oracle"),
                   default="equations")
    p.add_argument("--max-steps", type=int, default=12,
                   help="run bound for --route oracle")
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--depth", type=int, default=12)

    p = add("untime-stack", _cmd_untime_stack,
            "remove stack clock constraints from a dense-timed PDA")
    p.add_argument("file")
    p.add_argument("-o", "--output")

    p = add("to-trpda", _cmd_to_trpda,
            "compile a dense-timed PDA to a timed-register PDA")
    p.add_argument("file")
    p.add_argument("-o", "--output")

    p = add("short-form", _cmd_short_form,
            "split rules into single-symbol pushes and pops")
    p.add_argument("file")
    p.add_argument("-o", "--output")

    p = add("untiming-cfg", _cmd_untiming_cfg,
            "untime a timed grammar over its orbit alphabet")
    p.add_argument("file")

    p = add("to-equations", _cmd_to_equations,
            "compile emptiness to an integer-set equation system")
    p.add_argument("file")
    p.add_argument("-o", "--output")

    p = add("solve", _cmd_solve, "solve an equation system for a variable")
    p.add_argument("file")
    p.add_argument("--var", required=True)
    p.add_argument("--backend", choices=("accel", "bounded"),
                   default="accel")
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--depth", type=int, default=12)

    p = add("member", _cmd_member,
            "test membership of an integer in a variable's solution")
    p.add_argument("file")
    p.add_argument("--var", required=True)
    p.add_argument("--value", type=int, required=True)
    p.add_argument("--backend", choices=("accel", "bounded"),
                   default="accel")
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--depth", type=int, default=12)

    p = add("simulate", _cmd_simulate, "run a timed word on an automaton")
    p.add_argument("automaton")
    p.add_argument("word")
    p.add_argument("--max-silent", type=int, default=None)

    p = add("encode-minsky", _cmd_encode_minsky,
            "encode a two-counter machine as a timed-register PDA")
    p.add_argument("file")
    p.add_argument("-o", "--output")

    return ap


def cli_dispatch(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    args._t0 = time.perf_counter()
    args._echo = list(sys.argv[1:] if argv is None else argv)
    random.seed(args.seed)
    np.random.seed(args.seed % (2 ** 32))
    try:
        return args._fn(args)
    except _CliError as e:
        report = {"schema": SCHEMA, "command": args._echo,
                  "error": str(e), "verdict": "Error"}
        if args.json:
            print(json.dumps(report, indent=2, sort_keys=True))
        else:
            print(f"error: {e}", file=sys.stderr)
        return _EXIT_ERROR


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
