# cli.py
# ----------------------------------------------------------------------
# Batch front door for the pipeline: discover a tree + parameters from a
# log, simulate a tree into a synthetic log, compare two logs with EMD,
# or serve the HTTP API.
#
# Conventions: stdout carries data, stderr carries diagnostics and
# warnings; exit code 0 on success, 2 for user errors (unreadable
# inputs, bad flags, validation failures), 1 for internal faults.  All
# randomness requires an explicit --seed so repeated invocations are
# byte-identical; --figures DIR additionally renders PNG report figures.
# ----------------------------------------------------------------------
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .discovery import NoReplayableTraces, annotate_with_report, discover_tree
from .emd import emd, emd_to_json
from .eventlog import (
    ColumnMapping,
    EventLog,
    LogError,
    parse_csv,
    parse_timestamp,
    write_csv,
)
from .params import (
    ParamError,
    ParameterSet,
    mine_parameters,
    params_from_json,
    params_to_json,
    validate_params,
    with_profiles_for,
)
from .ptree import (
    ProcessTree,
    TreeError,
    activity_names,
    parse_tree,
    render_tree,
    tree_from_json,
    tree_to_json,
)
from .simengine import (
    SimConfig,
    SimError,
    result_summary,
    simulate,
    write_interruptions,
)

__all__ = ["main"]

DEFAULT_START = "2024-01-01 00:00:00"   # fixed Monday, never the wall clock

_USER_ERRORS = (LogError, TreeError, ParamError, SimError,
                NoReplayableTraces, OSError, ValueError)


def _warn(messages) -> None:
    for message in messages:
        print(f"warning: {message}", file=sys.stderr)


def _read_log(path: str, mapping: ColumnMapping = ColumnMapping()) -> EventLog:
    with open(path, "rb") as stream:
        return parse_csv(stream, mapping)


def _read_tree(path: str) -> ProcessTree:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return tree_from_json(json.loads(text))
    return parse_tree(text)


def _write_json(path: str, document: dict) -> None:
    Path(path).write_text(json.dumps(document, indent=2) + "\n",
                          encoding="utf-8")


# -- discover -----------------------------------------------------------

def _cmd_discover(args: argparse.Namespace) -> int:
    mapping = ColumnMapping(case=args.col_case, activity=args.col_activity,
                            start=args.col_start, end=args.col_end,
                            resource=args.col_resource)
    log = _read_log(args.log, mapping)
    tree, report = annotate_with_report(discover_tree(log), log)
    _warn(report.warnings)
    if report.unreplayable_traces:
        print(f"warning: {report.unreplayable_traces} of "
              f"{report.replayed_traces + report.unreplayable_traces} traces "
              "could not be replayed on the discovered tree",
              file=sys.stderr)
    params, param_warnings = mine_parameters(log, activity_names(tree))
    _warn(param_warnings)

    if args.json:
        _write_json(args.tree, tree_to_json(tree))
    else:
        Path(args.tree).write_text(render_tree(tree) + "\n", encoding="utf-8")
    _write_json(args.params, params_to_json(params))
    if args.figures:
        from .figures import figure_tree, figure_variants
        figure_variants(log, Path(args.figures) / "variants.png")
        figure_tree(tree, Path(args.figures) / "tree.png")
    print(render_tree(tree))
    return 0


# -- simulate -----------------------------------------------------------

def _windows(pairs) -> Optional[tuple[tuple[int, int], ...]]:
    if not pairs:
        return None
    windows = []
    for begin, end in pairs:
        window = (parse_timestamp(begin), parse_timestamp(end))
        if window[1] <= window[0]:
            raise ValueError(f"window ends before it begins: {begin} / {end}")
        windows.append(window)
    return tuple(windows)


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.cases < 1:
        raise ValueError("--cases must be at least 1")
    tree = _read_tree(args.tree)
    with open(args.params, "r", encoding="utf-8") as stream:
        params = params_from_json(json.load(stream))
    params, warnings = with_profiles_for(params, activity_names(tree))
    _warn(warnings)
    problems = validate_params(params)
    if problems:
        raise ParamError("; ".join(problems))

    config = SimConfig(
        num_cases=args.cases,
        start_time=parse_timestamp(args.start),
        seed=args.seed,
        interrupt_activity=args.interrupt_activity,
        interrupt_case=args.interrupt_case,
        interrupt_process=_windows(args.window),
        process_capacity_override=args.process_capacity,
    )
    result = simulate(tree, params, config)

    Path(args.log).write_bytes(write_csv(result.log))
    document = result_summary(result)
    _write_json(args.kpis, document)
    if args.interruptions:
        with open(args.interruptions, "w", encoding="utf-8",
                  newline="") as stream:
            write_interruptions(result.interruptions, stream)
    if args.figures:
        from .figures import figure_kpis, figure_variants
        figure_kpis(result.kpis, Path(args.figures) / "kpis.png")
        if result.log.traces:
            figure_variants(result.log,
                            Path(args.figures) / "variants.png")
    print(json.dumps(document, indent=2))
    return 0


# -- compare ------------------------------------------------------------

def _cmd_compare(args: argparse.Namespace) -> int:
    report = emd(_read_log(args.log1), _read_log(args.log2))
    if args.figures:
        from .figures import figure_emd
        figure_emd(report, Path(args.figures) / "emd.png")
    print(json.dumps(emd_to_json(report), indent=2))
    return 0


# -- serve --------------------------------------------------------------

def _cmd_serve(args: argparse.Namespace) -> int:
    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValueError(f"--addr must be HOST:PORT, got {args.addr!r}")
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.root), workers=args.workers,
                     ui_dir=Path(args.ui) if args.ui else None)
    uvicorn.run(app, host=host, port=int(port_text), log_level="warning")
    return 0


# -- parser -------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treesim",
        description="Mine a process tree and its performance parameters "
                    "from an event log, edit them, re-simulate, and score "
                    "the what-if against reality.")
    commands = parser.add_subparsers(dest="command", required=True)

    discover = commands.add_parser(
        "discover", help="mine tree + parameters from a CSV event log")
    discover.add_argument("log", help="event log CSV")
    discover.add_argument("--tree", default="tree.txt",
                          help="output file for the tree (default tree.txt)")
    discover.add_argument("--params", default="params.json",
                          help="output file for the parameters "
                               "(default params.json)")
    discover.add_argument("--json", action="store_true",
                          help="write the tree as JSON instead of text")
    discover.add_argument("--figures", metavar="DIR",
                          help="also render PNG report figures into DIR")
    defaults = ColumnMapping()
    discover.add_argument("--col-case", default=defaults.case)
    discover.add_argument("--col-activity", default=defaults.activity)
    discover.add_argument("--col-start", default=defaults.start)
    discover.add_argument("--col-end", default=defaults.end)
    discover.add_argument("--col-resource", default=defaults.resource)
    discover.set_defaults(func=_cmd_discover)

    sim = commands.add_parser(
        "simulate", help="run the simulator on a tree + parameter file")
    sim.add_argument("tree", help="tree file (text or JSON)")
    sim.add_argument("params", help="parameter JSON file")
    sim.add_argument("--cases", type=int, required=True,
                     help="number of cases to generate")
    sim.add_argument("--seed", type=int, required=True,
                     help="random seed (required: no wall-clock default)")
    sim.add_argument("--start", default=DEFAULT_START,
                     help=f"simulation start timestamp "
                          f"(default {DEFAULT_START} UTC)")
    sim.add_argument("--log", default="log.csv",
                     help="output CSV (default log.csv)")
    sim.add_argument("--kpis", default="kpis.json",
                     help="output KPI JSON (default kpis.json)")
    sim.add_argument("--interrupt-activity", action="store_true",
                     help="pause running activities outside calendar hours")
    sim.add_argument("--interrupt-case", action="store_true",
                     help="record case-level calendar interruptions")
    sim.add_argument("--window", nargs=2, action="append", default=[],
                     metavar=("BEGIN", "END"),
                     help="process-interruption window (repeatable)")
    sim.add_argument("--process-capacity", type=int, default=None,
                     help="override the mined process capacity")
    sim.add_argument("--interruptions", metavar="FILE",
                     help="write the interruption records CSV to FILE")
    sim.add_argument("--figures", metavar="DIR",
                     help="also render PNG report figures into DIR")
    sim.set_defaults(func=_cmd_simulate)

    compare = commands.add_parser(
        "compare", help="Earth-Mover Distance between two logs")
    compare.add_argument("log1")
    compare.add_argument("log2")
    compare.add_argument("--figures", metavar="DIR",
                         help="also render the transport-plan figure")
    compare.set_defaults(func=_cmd_compare)

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--addr",
                       default=os.environ.get("TREESIM_ADDR",
                                              "127.0.0.1:8000"),
                       help="listen address HOST:PORT "
                            "(env TREESIM_ADDR)")
    serve.add_argument("--root",
                       default=os.environ.get("TREESIM_ROOT", "projects"),
                       help="project persistence directory "
                            "(env TREESIM_ROOT)")
    serve.add_argument("--workers", type=int,
                       default=int(os.environ.get("TREESIM_WORKERS", "2")),
                       help="simulation worker threads "
                            "(env TREESIM_WORKERS)")
    serve.add_argument("--ui",
                       default=os.environ.get("TREESIM_UI", ""),
                       help="serve the built web UI from this directory "
                            "at /ui (env TREESIM_UI)")
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as error:
        print(f"error: {error}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
