"""
Timed scenario scripts.

One command per line, prefixed by its time in milliseconds from the start
of the run::

    # calculation first, then display
    0    load calc.xml
    0    load display.xml
    10   start calc
    20   start disp
    30   expect-state disp ACTIVE
    40   stop calc
    50   expect-state disp UNSATISFIED

Times must not decrease. In virtual mode the container clock is advanced to
each command's time; in wall-clock mode the runner sleeps until then.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

from .session import FAILED, USAGE, Quit, Session


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class ScriptStep:
    line_no: int
    time_ms: float
    command: str


@dataclass
class ScenarioResult:
    transcript: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    exit_code: int = 0


def parse_script(text: str) -> list[ScriptStep]:
    steps = []
    last = float("-inf")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            t = float(head)
        except ValueError:
            raise ScriptError(f"line {line_no}: expected '<time_ms> <command>', got {raw!r}") from None
        if t < last:
            raise ScriptError(f"line {line_no}: time {t:g} ms goes backwards (previous {last:g} ms)")
        if not rest.strip():
            raise ScriptError(f"line {line_no}: missing command")
        last = t
        steps.append(ScriptStep(line_no, t, rest.strip()))
    return steps


def run_scenario(steps: list[ScriptStep], session: Session) -> ScenarioResult:
    """Execute *steps* at their scheduled times; exit code 0 iff every expectation holds."""
    result = ScenarioResult()
    elapsed_ms = 0.0
    wall_start = time.monotonic()
    for step in steps:
        if step.time_ms > elapsed_ms:
            if session.virtual:
                session.advance(step.time_ms - elapsed_ms)
            else:
                delay = wall_start + step.time_ms / 1000 - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            elapsed_ms = step.time_ms
        result.transcript.append(f"[{step.time_ms:g} ms] {step.command}")
        try:
            outcome = session.execute(step.command)
        except Quit:
            break
        result.transcript.extend("  " + ln for ln in outcome.lines)
        verb = step.command.split()[0].lower()
        if verb == "expect-state" and outcome.status != 0:
            result.failures.append(f"line {step.line_no}: {'; '.join(outcome.lines)}")
        elif outcome.status == USAGE:
            result.failures.append(f"line {step.line_no}: {'; '.join(outcome.lines)}")
    result.exit_code = FAILED if result.failures else 0
    return result


def run_script_file(path: str, session: Session) -> ScenarioResult:
    with open(path, encoding="utf-8") as fh:
        steps = parse_script(fh.read())
    if session.base_dir == ".":
        session.base_dir = os.path.dirname(os.path.abspath(path))
    return run_scenario(steps, session)


def make_session(executive, base_dir: str = ".", out=None) -> Session:
    return Session(executive, base_dir=base_dir, out=out)


__all__ = [
    "ScriptError",
    "ScriptStep",
    "ScenarioResult",
    "parse_script",
    "run_scenario",
    "run_script_file",
    "make_session",
]
