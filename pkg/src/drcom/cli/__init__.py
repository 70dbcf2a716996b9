"""
Command-line entry point.

    drcom shell                      interactive operator shell (reads stdin)
    drcom run SCRIPT                 run a timed scenario script
    drcom experiment                 calculation/display latency run
    drcom replay LOG                 re-dispatch a recorded event log
    drcom parse FILE                 validate a descriptor and print it back

Global options (``--mode``, ``--cap``, ``--policy``, ``--resolver``, ``--log``,
``--strict-six``) may appear before or after the subcommand.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from ..descriptor import DescriptorWarning, ParseError, load_descriptor, serialize_descriptor
from ..executive import Executive, replay
from ..resolver import load_resolving_service
from ..rtsim import VirtualContainer, WallClockContainer
from .scenario import ScriptError, run_script_file
from .session import FAILED, OK, USAGE, Session, run_shell

_DEFAULTS = {
    "mode": "virtual",
    "cap": 1.0,
    "policy": "util",
    "resolver": None,
    "log": None,
    "strict_six": False,
}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("executive options")
    g.add_argument("--mode", choices=("wall", "virtual"), default=argparse.SUPPRESS,
                   help="container clock (default: virtual)")
    g.add_argument("--cap", type=float, default=argparse.SUPPRESS, help="per-CPU admission cap (default 1.0)")
    g.add_argument("--policy", choices=("util", "rm"), default=argparse.SUPPRESS)
    g.add_argument("--resolver", default=argparse.SUPPRESS,
                   help="external resolving service: 'accept', 'reject' or module:attr")
    g.add_argument("--log", default=argparse.SUPPRESS, help="write the event log to this file")
    g.add_argument("--strict-six", action="store_true", default=argparse.SUPPRESS,
                   help="reject component names longer than six characters")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="drcom", description="Dynamic real-time component executive",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    shell = sub.add_parser("shell", parents=[common], help="interactive operator shell")
    shell.add_argument("--prompt", action="store_true", help="print a prompt before each command")
    shell.add_argument("--base-dir", default=".", help="directory for relative 'load' paths")

    run = sub.add_parser("run", parents=[common], help="run a timed scenario script")
    run.add_argument("script")

    exp = sub.add_parser("experiment", parents=[common], help="calculation/display latency run")
    exp.add_argument("--calc-hz", type=float, default=1000.0)
    exp.add_argument("--display-hz", type=float, default=4.0)
    exp.add_argument("--duration", type=float, default=10.0, help="seconds")
    exp.add_argument("--load", choices=("light", "stress", "both"), default="light")
    exp.add_argument("--workers", type=int, default=None, help="stress processes (default: core count)")
    exp.add_argument("--jitter-ns", type=int, nargs="+", default=None,
                     help="virtual mode only: release delays cycled per job")
    exp.add_argument("--unit", choices=("ns", "us"), default="ns")
    exp.add_argument("--csv", default=None, help="write raw samples to this CSV file")
    exp.add_argument("--show-display", action="store_true", help="print the display task's output")

    rep = sub.add_parser("replay", help="re-dispatch a recorded event log and compare")
    rep.add_argument("logfile")

    parse = sub.add_parser("parse", parents=[common], help="validate a descriptor file")
    parse.add_argument("file")
    parse.add_argument("--lenient", action="store_true", help="warn about unknown content instead of failing")
    return parser


def _options(ns: argparse.Namespace) -> dict:
    return {k: getattr(ns, k, v) for k, v in _DEFAULTS.items()}


def _executive(opts: dict, out) -> Executive:
    if opts["mode"] == "wall":
        container = WallClockContainer(output=lambda s: print(s, file=out, flush=True))
    else:
        container = VirtualContainer(output=lambda s: print(s, file=out, flush=True))
    external = load_resolving_service(opts["resolver"]) if opts["resolver"] else None
    return Executive(
        container=container,
        cap=opts["cap"],
        policy=opts["policy"],
        external=external,
        log=opts["log"],
        strict_six=opts["strict_six"],
        resolver_name=opts["resolver"],
    )


def _cmd_shell(ns, opts, stdin, stdout) -> int:
    with Session(_executive(opts, stdout), base_dir=ns.base_dir, out=stdout) as session:
        status = run_shell(session, stdin, stdout, prompt=ns.prompt)
    return status


def _cmd_run(ns, opts, stdout) -> int:
    with Session(_executive(opts, stdout), out=stdout) as session:
        try:
            result = run_script_file(ns.script, session)
        except ScriptError as exc:
            print(f"script error: {exc}", file=sys.stderr)
            return USAGE
    for failure in result.failures:
        print(f"FAILED {failure}", file=stdout)
    return result.exit_code


def _cmd_experiment(ns, opts, stdout) -> int:
    from .experiment import run_latency_experiment

    loads = ("light", "stress") if ns.load == "both" else (ns.load,)
    sink = (lambda s: print(s, file=stdout, flush=True)) if ns.show_display else None
    rows = []
    results = []
    for load in loads:
        res = run_latency_experiment(
            ns.calc_hz, ns.display_hz, ns.duration, load,
            mode=opts["mode"], workers=ns.workers, jitter_ns=ns.jitter_ns, output=sink,
            executive_kwargs={"cap": opts["cap"], "policy": opts["policy"]},
        )
        results.append(res)
        rows += [(f"{name} ({load})", st) for name, st in res.stats.items()]
    from ..stats import format_table

    stdout.write(format_table(rows, unit=ns.unit))
    if ns.csv:
        merged = [s for res in results for name in res.samples for s in res.samples[name]]
        from ..rtsim import write_latency_csv

        write_latency_csv(merged, ns.csv)
    return OK


def _cmd_replay(ns, stdout) -> int:
    report = replay(ns.logfile)
    if report.identical:
        print(f"replay identical: {len(report.actual)} events", file=stdout)
        return OK
    i = report.first_mismatch()
    print(f"replay diverged at event {i + 1}", file=stdout)
    if i < len(report.expected):
        print(f"  logged:   {report.expected[i]}", file=stdout)
    if i < len(report.actual):
        print(f"  replayed: {report.actual[i]}", file=stdout)
    return FAILED


def _cmd_parse(ns, opts, stdout) -> int:
    import warnings

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DescriptorWarning)
        try:
            d = load_descriptor(ns.file, strict=not ns.lenient, strict_six=opts["strict_six"])
        except ParseError as exc:
            print(f"error [{type(exc).__name__}]: {exc}", file=stdout)
            return FAILED
        except ValueError as exc:
            print(f"error [{getattr(exc, 'reason', type(exc).__name__)}]: {exc}", file=stdout)
            return FAILED
    for w in caught:
        print(f"warning: {w.message}", file=stdout)
    stdout.write(serialize_descriptor(d))
    if not serialize_descriptor(d).endswith("\n"):
        stdout.write("\n")
    return OK


def main(argv: Optional[Sequence[str]] = None, *, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    ns = build_parser().parse_args(argv)
    opts = _options(ns)
    try:
        if ns.command == "shell":
            return _cmd_shell(ns, opts, stdin, stdout)
        if ns.command == "run":
            return _cmd_run(ns, opts, stdout)
        if ns.command == "experiment":
            return _cmd_experiment(ns, opts, stdout)
        if ns.command == "replay":
            return _cmd_replay(ns, stdout)
        return _cmd_parse(ns, opts, stdout)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


__all__ = ["main", "build_parser"]
