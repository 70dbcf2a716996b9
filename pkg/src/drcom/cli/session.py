"""
Operator sessions: the command language shared by the shell and scripts.

A session owns an executive running on its own event loop and turns command
lines (``load calc.xml``, ``start calc`` ...) into submitted events. It never
touches executive state directly; even reads go through the loop.
"""

from __future__ import annotations

import os
import shlex
import sys
import time
from dataclasses import dataclass
from typing import Callable, Optional, TextIO

from ..executive import EventLoop, Executive, error_code
from ..lifecycle import EventKind, LifecycleEvent, LifecycleState
from ..rtsim import VirtualContainer
from ..stats import compute_stats, format_table

OK, FAILED, USAGE = 0, 1, 2

USAGE_TEXT = """\
commands:
  load <file>                  install a component descriptor
  enable|disable <name>
  start|stop <name>
  suspend|resume <name>
  uninstall <name>
  set <name> <prop> <value>    change a component property
  status [name]
  stats <name>                 latency statistics since the last 'stats'
  sleep <ms>                   let time pass (virtual or real)
  expect-state <name> <STATE>
  help | quit"""

_SIMPLE = {
    "enable": EventKind.ENABLE,
    "disable": EventKind.DISABLE,
    "start": EventKind.START,
    "stop": EventKind.STOP,
    "suspend": EventKind.SUSPEND,
    "resume": EventKind.RESUME,
    "uninstall": EventKind.UNINSTALL,
}


class Quit(Exception):
    pass


@dataclass
class Outcome:
    status: int
    lines: list[str]


class Session:
    def __init__(
        self,
        executive: Executive,
        *,
        base_dir: str = ".",
        out: Optional[TextIO] = None,
    ):
        self.executive = executive
        self.loop = EventLoop(executive).start()
        self.base_dir = base_dir
        self.out = out
        self.last_status = OK

    @property
    def virtual(self) -> bool:
        return isinstance(self.executive.container, VirtualContainer)

    def close(self) -> None:
        try:
            self.loop.call(self.executive.container.shutdown).result()
        finally:
            self.loop.stop()
            self.executive.log.close()

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # ------------------------------------------------------------------ #

    def _call(self, fn: Callable, *args):
        return self.loop.call(fn, *args).result()

    def _submit(self, kind: EventKind, subject, payload=None) -> Outcome:
        result = self.loop.submit(LifecycleEvent(kind, subject, payload)).result()
        lines = [str(c) for c in result.changes]
        lines += [
            f"rebind: [{b.consumer}].{b.consumer_port} <- [{b.provider}].{b.provider_port}"
            for b in result.rebinds
        ]
        if result.error is not None:
            lines.append(f"error [{error_code(result.error)}]: {result.error}")
            return Outcome(FAILED, lines)
        if kind is EventKind.INSTALL and not result.changes:
            lines.append(f"installed as {result.handle} (REGISTERED)")
        return Outcome(OK, lines)

    def _handle(self, name: str) -> int:
        return self._call(self.executive.handle, name)

    def advance(self, ms: float) -> None:
        ns = int(round(ms * 1e6))
        if self.virtual:
            self._call(self.executive.container.run_for, ns)
        else:
            time.sleep(ns / 1e9)

    def execute(self, line: str) -> Outcome:
        """Run one command line and print its output."""
        outcome = self._execute(line)
        self.last_status = outcome.status
        if self.out is not None:
            for text in outcome.lines:
                print(text, file=self.out)
            self.out.flush()
        return outcome

    def _execute(self, line: str) -> Outcome:
        try:
            words = shlex.split(line, comments=True)
        except ValueError as exc:
            return Outcome(USAGE, [f"usage error: {exc}"])
        if not words:
            return Outcome(OK, [])
        verb, args = words[0].lower(), words[1:]
        try:
            return self._dispatch_verb(verb, args)
        except (KeyError, LookupError) as exc:
            return Outcome(FAILED, [f"error [{error_code(exc)}]: {exc}"])
        except OSError as exc:
            return Outcome(FAILED, [f"error [{type(exc).__name__}]: {exc}"])

    def _dispatch_verb(self, verb: str, args: list[str]) -> Outcome:
        if verb in ("quit", "exit"):
            raise Quit()
        if verb == "help":
            return Outcome(OK, USAGE_TEXT.splitlines())
        if verb == "load" and len(args) == 1:
            path = args[0] if os.path.isabs(args[0]) else os.path.join(self.base_dir, args[0])
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
            return self._submit(EventKind.INSTALL, text)
        if verb in _SIMPLE and len(args) == 1:
            return self._submit(_SIMPLE[verb], self._handle(args[0]))
        if verb == "set" and len(args) == 3:
            return self._submit(EventKind.SET_PROPERTY, self._handle(args[0]), (args[1], args[2]))
        if verb == "status" and len(args) <= 1:
            return self._status(args[0] if args else None)
        if verb == "stats" and len(args) == 1:
            handle = self._handle(args[0])
            samples = self._call(self.executive.container.collect_latency, handle)
            table = format_table({args[0]: compute_stats(samples)})
            return Outcome(OK, table.rstrip("\n").splitlines() + [f"samples: {len(samples)}"])
        if verb == "sleep" and len(args) == 1:
            try:
                ms = float(args[0])
            except ValueError:
                return Outcome(USAGE, [f"usage error: bad duration {args[0]!r}"])
            self.advance(ms)
            return Outcome(OK, [])
        if verb == "expect-state" and len(args) == 2:
            return self._expect(args[0], args[1])
        return Outcome(USAGE, [f"usage error: cannot parse {' '.join([verb] + args)!r}", "type 'help' for commands"])

    def _status(self, name: Optional[str]) -> Outcome:
        def collect():
            if name is not None:
                return [self.executive.status(self.executive.handle(name))]
            return [self.executive.status(i.id) for i in self.executive.registry]

        lines = []
        for info in self._call(collect):
            line = f"{info['name']}[{info['id']}]: {info['state']}"
            if info["bindings"]:
                line += " bound " + ", ".join(info["bindings"])
            if info.get("task"):
                line += f" task={info['task']}"
            if info["state"] in ("UNSATISFIED", "REGISTERED") and info["reason"]:
                line += f" ({info['reason']})"
            lines.append(line)
        return Outcome(OK, lines)

    def _expect(self, name: str, state: str) -> Outcome:
        try:
            wanted = LifecycleState(state.upper())
        except ValueError:
            return Outcome(USAGE, [f"usage error: unknown state {state!r}"])

        def current():
            try:
                return self.executive.state(name)
            except KeyError:
                return LifecycleState.UNINSTALLED

        actual = self._call(current)
        if actual is wanted:
            return Outcome(OK, [f"ok: {name} is {wanted}"])
        return Outcome(FAILED, [f"expectation failed: {name} is {actual}, expected {wanted}"])


def run_shell(session: Session, stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout, prompt: bool = False) -> int:
    """Read commands until EOF or ``quit``; returns the status of the last command."""
    session.out = stdout
    while True:
        if prompt:
            stdout.write("drcom> ")
            stdout.flush()
        line = stdin.readline()
        if not line:
            break
        try:
            session.execute(line)
        except Quit:
            break
    return session.last_status
