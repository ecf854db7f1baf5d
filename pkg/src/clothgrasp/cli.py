"""Command-line front end.

Exit status: 0 success, 1 diagnostics emitted (parse errors, validation
errors, no plan), 2 usage error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from typing import Sequence, TextIO

from . import __version__
from .classifier import InvalidTransition, TransitionFlags, classify_transition, explain_transition
from .core import Geometry, hands_used, opposition_couples, vf_count
from .corpus import CORPUS_ENV_VAR, Corpus, SchemaError, has_errors, load_corpus_dir, reference_corpus, validate_corpus, validate_task
from .notation import ParseError, Severity, parse_grasp, print_grasp
from .planner import (
    BoundExceeded,
    CostWeights,
    NoPlanFound,
    UnrealizableState,
    env_from_names,
    find_plan,
)
from .stats import (
    coverage_report,
    enumerate_grasps,
    grasp_instance_tally,
    paper_task_totals,
    primitive_tally,
    task_distribution,
)

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise _Exit(status)


class _Exit(Exception):
    def __init__(self, status: int):
        self.status = status


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("text", "json"), default="text", help="output format (default text)")

    p = _Parser(prog="clothgrasp", description="Grasp-state notation, primitive classification, corpus checks and planning for cloth manipulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument(
        "--corpus",
        metavar="DIR",
        help=f"corpus directory (default: ${CORPUS_ENV_VAR}, else the packaged reference corpus)",
    )
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("parse", parents=[fmt], help="parse a grasp expression and dump its structure")
    sp.add_argument("grasp")
    sp.add_argument("--hands", type=int, default=2, help="hands available (default 2)")

    sp = sub.add_parser("print", parents=[fmt], help="print the canonical form of a grasp expression")
    sp.add_argument("grasp")
    sp.add_argument("--hands", type=int, default=2)

    sp = sub.add_parser("classify", parents=[fmt], help="classify a transition into a manipulation primitive")
    sp.add_argument("--pre", required=True, help="grasp before the transition")
    sp.add_argument("--post", required=True, help="grasp after the transition")
    sp.add_argument("--sliding", action="store_true", help="the cloth slides while the grasp is kept")
    sp.add_argument("--cloth-changed", action="store_true", help="the cloth state changes")
    sp.add_argument("--point-changed", action="store_true", help="the grasp point on the cloth changes")
    sp.add_argument("--explain", action="store_true", help="print the rule trace")

    sp = sub.add_parser("validate", parents=[fmt], help="check task scripts and cross-table consistency")
    sp.add_argument("--task", metavar="ID", help="validate a single task script")

    sp = sub.add_parser("plan", parents=[fmt], help="search for a primitive sequence between two grasps")
    sp.add_argument("--start", required=True)
    sp.add_argument("--goal", required=True)
    sp.add_argument(
        "--gripper",
        required=True,
        nargs="+",
        metavar="H=ID",
        help="gripper per hand, e.g. 'H1=b,H2=u' (a bare id is used for every hand)",
    )
    sp.add_argument("--env", default="", help="comma-separated fixtures: table, hook, hanger")
    sp.add_argument("--weights", default="", help="per-primitive costs, e.g. 'Ex=1,G=1,RG=2'")
    sp.add_argument("--hands", type=int, default=2)
    sp.add_argument("--budget", type=int, default=10**5, help="explored-state budget")

    sp = sub.add_parser("stats", parents=[fmt], help="tallies over the corpus")
    sp.add_argument("--report", required=True, choices=("grasps", "primitives", "tasks", "papers", "coverage"))
    sp.add_argument("--max-vfs", type=int, default=3, help="coverage bound: VFs per unit")
    sp.add_argument("--max-units", type=int, default=3, help="coverage bound: units per state")
    sp.add_argument("--hands", type=int, default=2, help="coverage bound: hands")
    sp.add_argument("--show-unused", type=int, default=20, help="coverage text output: unused forms to list")

    sp = sub.add_parser("enumerate", parents=[fmt], help="list every canonical grasp state within bounds")
    sp.add_argument("--max-vfs", type=int, required=True)
    sp.add_argument("--max-units", type=int, required=True)
    sp.add_argument("--hands", type=int, required=True)
    sp.add_argument("--tools", default="", help="tool-borne single-finger geometries to include, e.g. 'L'")
    sp.add_argument("--cap", type=int, default=200_000, help="maximum number of states")
    return p


class _Ctx:
    def __init__(self, args, out: TextIO, err: TextIO):
        self.args = args
        self.out = out
        self.err = err
        self._corpus: Corpus | None = None

    @property
    def json(self) -> bool:
        return getattr(self.args, "format", "text") == "json"

    def emit(self, text: str = "") -> None:
        self.out.write(text + "\n")

    def emit_json(self, obj) -> None:
        self.out.write(json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False) + "\n")

    def corpus(self) -> Corpus:
        if self._corpus is None:
            directory = self.args.corpus or os.environ.get(CORPUS_ENV_VAR)
            self._corpus = load_corpus_dir(directory) if directory else reference_corpus()
        return self._corpus

    def grasp(self, text: str, hands: int = 2, what: str = "grasp"):
        try:
            return parse_grasp(text, hands)
        except ParseError as exc:
            raise _Diagnostic(_caret(what, text, exc)) from None


class _Diagnostic(Exception):
    """Reported on the error stream; exit status 1."""


def _caret(what: str, text: str, exc: ParseError) -> str:
    return f"{what}: {exc.diagnostic}\n  {text}\n  {' ' * exc.position}^"


# ---------------------------------------------------------------------------


def _cmd_parse(ctx: _Ctx) -> int:
    state = ctx.grasp(ctx.args.grasp, ctx.args.hands)
    units = [
        {
            "unit": str(p.unit),
            "assignment": str(p.assignment),
            "vfs": [{"geometry": f.geometry.name, "extrinsic": f.extrinsic, "via_tool": f.via_tool} for f in p.unit.vfs],
        }
        for p in state.units
    ]
    info = {
        "input": ctx.args.grasp,
        "canonical": print_grasp(state),
        "units": units,
        "hands_used": hands_used(state.units),
        "vf_count": vf_count(state),
        "opposition_couples": opposition_couples(state),
    }
    if ctx.json:
        ctx.emit_json(info)
        return EXIT_OK
    ctx.emit(info["canonical"])
    for u in units:
        tool = " (tool)" if any(v["via_tool"] for v in u["vfs"]) else ""
        ctx.emit(f"  {u['unit']:<6} {u['assignment']}{tool}")
    ctx.emit(f"hands {info['hands_used']}, vfs {info['vf_count']}, opposition couples {info['opposition_couples']}")
    return EXIT_OK


def _cmd_print(ctx: _Ctx) -> int:
    text = print_grasp(ctx.grasp(ctx.args.grasp, ctx.args.hands))
    if ctx.json:
        ctx.emit_json({"input": ctx.args.grasp, "canonical": text})
    else:
        ctx.emit(text)
    return EXIT_OK


def _cmd_classify(ctx: _Ctx) -> int:
    a = ctx.args
    pre = ctx.grasp(a.pre, what="pre")
    post = ctx.grasp(a.post, what="post")
    flags = TransitionFlags(a.sliding, a.cloth_changed, a.point_changed)
    try:
        result = classify_transition(pre, post, flags)
        trace = explain_transition(pre, post, flags)
    except InvalidTransition as exc:
        raise _Diagnostic(f"Error: {exc}") from None
    if ctx.json:
        ctx.emit_json(
            {
                "pre": print_grasp(pre),
                "post": print_grasp(post),
                "primitive": result.primitive.value,
                "rule": result.rule_fired.name,
                "regrasp": result.regrasp,
                "trace": trace.splitlines(),
            }
        )
    else:
        ctx.emit(result.primitive.value)
        if a.explain:
            ctx.emit(trace)
    return EXIT_OK


def _cmd_validate(ctx: _Ctx) -> int:
    corpus = ctx.corpus()
    if ctx.args.task:
        try:
            diags = validate_task(corpus.task(ctx.args.task))
        except KeyError as exc:
            raise _Diagnostic(f"Error: {exc.args[0]}") from None
    else:
        diags = validate_corpus(corpus)
    errors = sum(d.severity is Severity.ERROR for d in diags)
    warnings = len(diags) - errors
    if ctx.json:
        ctx.emit_json({"diagnostics": [d.to_json() for d in diags], "errors": errors, "warnings": warnings})
    else:
        for d in diags:
            ctx.emit(str(d))
        ctx.emit(f"{errors} error(s), {warnings} warning(s)")
    return EXIT_DIAGNOSTICS if has_errors(diags) else EXIT_OK


def _gripper_map(specs: Sequence[str], hands: int) -> dict[int, str]:
    items = [x.strip() for s in specs for x in s.split(",") if x.strip()]
    if len(items) == 1 and "=" not in items[0]:
        return {h: items[0] for h in range(1, hands + 1)}
    out = {}
    for item in items:
        key, sep, gid = item.partition("=")
        key = key.strip().upper()
        if not sep or not key.startswith("H") or not key[1:].isdigit():
            raise UsageError(f"bad --gripper entry {item!r}; expected H<n>=<id>")
        out[int(key[1:])] = gid.strip()
    missing = [h for h in range(1, hands + 1) if h not in out]
    if missing:
        raise UsageError(f"--gripper gives no gripper for H{missing[0]}")
    return out


def _cmd_plan(ctx: _Ctx) -> int:
    a = ctx.args
    corpus = ctx.corpus()
    try:
        env = env_from_names(a.env.split(","), a.hands)
        weights = CostWeights.parse(a.weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    grippers = _gripper_map(a.gripper, a.hands)
    try:
        profiles = [corpus.gripper(grippers[h]) for h in range(1, a.hands + 1)]
    except KeyError as exc:
        raise _Diagnostic(f"Error: {exc.args[0]}") from None
    start = ctx.grasp(a.start, a.hands, "start")
    goal = ctx.grasp(a.goal, a.hands, "goal")
    try:
        plan = find_plan(start, goal, profiles, env, weights, budget=a.budget)
    except (NoPlanFound, UnrealizableState, BoundExceeded) as exc:
        raise _Diagnostic(f"Error: {exc}") from None
    if ctx.json:
        ctx.emit_json(
            {
                "start": print_grasp(start),
                "goal": print_grasp(goal),
                "grippers": {f"H{h}": g for h, g in sorted(grippers.items())},
                "steps": [
                    {"primitive": s.primitive.value, "actor": s.actor, "pre": print_grasp(s.pre), "post": print_grasp(s.post)}
                    for s in plan.steps
                ],
                "cost": plan.cost,
                "explored": plan.explored,
            }
        )
    else:
        ctx.emit(plan.render())
    return EXIT_OK


def _cmd_stats(ctx: _Ctx) -> int:
    a = ctx.args
    corpus = ctx.corpus()
    if a.report == "coverage":
        try:
            report = coverage_report(corpus, (a.max_vfs, a.max_units, a.hands))
        except (ValueError, BoundExceeded) as exc:
            raise _Diagnostic(f"Error: {exc}") from None
        if ctx.json:
            ctx.emit_json(report.to_json())
        else:
            ctx.emit(report.render(a.show_unused))
        return EXIT_OK
    tally = {
        "grasps": grasp_instance_tally,
        "primitives": primitive_tally,
        "tasks": task_distribution,
        "papers": paper_task_totals,
    }[a.report](corpus)
    if ctx.json:
        ctx.emit_json(tally.to_json())
        return EXIT_OK
    if a.report == "primitives":
        ctx.emit(tally.summary_line())
        for d in tally.details:
            mark = "" if d["printed"] == d["realized"] else f"  (printed {d['printed']})"
            ctx.emit(f"  {d['type']:<2}  {d['realized']}  {d['description']}{mark}")
    elif a.report in ("tasks", "papers"):
        ctx.emit(tally.summary_line())
        for d in tally.details:
            key = d.get("task_id") or d.get("paper")
            counted = tally[key]
            mark = "" if d["printed"] in (None, counted) else f"  (printed {d['printed']})"
            ctx.emit(f"  {key:<20} {counted}{mark}")
    else:
        ctx.emit(tally.render())
    return EXIT_OK


def _cmd_enumerate(ctx: _Ctx) -> int:
    a = ctx.args
    try:
        tools = [Geometry[t.strip()] for t in a.tools.split(",") if t.strip()]
    except KeyError as exc:
        raise UsageError(f"unknown tool geometry {exc.args[0]!r} (expected P, L, Pi)") from None
    try:
        states = enumerate_grasps(a.max_vfs, a.max_units, a.hands, tools, cap=a.cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except BoundExceeded as exc:
        raise _Diagnostic(f"Error: {exc}") from None
    texts = [print_grasp(s) for s in states]
    if ctx.json:
        ctx.emit_json({"count": len(texts), "states": texts})
    else:
        for t in texts:
            ctx.emit(t)
    return EXIT_OK


COMMANDS = {
    "parse": _cmd_parse,
    "print": _cmd_print,
    "classify": _cmd_classify,
    "validate": _cmd_validate,
    "plan": _cmd_plan,
    "stats": _cmd_stats,
    "enumerate": _cmd_enumerate,
}


def run(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
        ctx = _Ctx(args, out, err)
        return COMMANDS[args.command](ctx)
    except _Exit as exc:
        return exc.status
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except _Diagnostic as exc:
        err.write(f"{exc}\n")
        return EXIT_DIAGNOSTICS
    except SchemaError as exc:
        err.write(f"Error: {exc}\n")
        return EXIT_DIAGNOSTICS
    except Exception:  # noqa: BLE001 - last-resort report
        err.write("internal error:\n" + traceback.format_exc())
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
