"""
The component executive.

Every lifecycle change goes through :meth:`Executive.dispatch`, which
processes one event atomically: it resolves functional constraints, consults
the admission policies, commits or releases CPU reservations, starts and
stops tasks in the container, and propagates the consequences (cascaded
deactivation of stranded consumers, re-resolution of waiting instances,
automatic restart of instances whose start was pending). The resulting
state changes are returned and appended to the event log, from which a fresh
executive reproduces them exactly.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import queue
import threading
from concurrent.futures import Future
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Optional, Union

from .descriptor import ComponentDescriptor, InvalidValue, ParseError, parse_descriptor, serialize_descriptor, _parse_typed
from .lifecycle import (
    PROVIDING,
    PUBLISHED,
    EventKind,
    LifecycleEvent,
    LifecycleState,
    StateChange,
    is_legal,
)
from .registry import ComponentInstance, Registry, RegistryError, UnknownId
from .resolver import (
    DEFAULT_TIMEOUT,
    Binding,
    CpuBudgetLedger,
    ResolvingService,
    UnsatisfiedReport,
    admit,
    cascade_unsatisfied,
    resolve_functional,
)
from .rtsim import Container, VirtualContainer, load_body
from .rtsim.channels import Resume, SetProperty, Suspend
from .rtsim.container import SpawnFailure, UnknownTask

logger = logging.getLogger(__name__)

S = LifecycleState
LOG_FORMAT = 1


class ExecutiveError(Exception):
    code = "ExecutiveError"


class WrongState(ExecutiveError):
    code = "WrongState"


class AdmissionRejected(ExecutiveError):
    code = "AdmissionRejected"


class IllegalTransition(ExecutiveError):
    code = "IllegalTransition"


def error_code(exc: BaseException) -> str:
    return getattr(exc, "code", type(exc).__name__)


@dataclass
class DispatchResult:
    sequence_no: int
    event: LifecycleEvent
    changes: list[StateChange] = field(default_factory=list)
    rebinds: list[Binding] = field(default_factory=list)
    handle: Optional[int] = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def record(self) -> dict:
        """The persisted form of this result, minus the event itself."""
        return {
            "seq": self.sequence_no,
            "handle": self.handle,
            "changes": [c.to_dict() for c in self.changes],
            "rebinds": [b.to_dict() for b in self.rebinds],
            "error": None if self.error is None else {"code": error_code(self.error), "message": str(self.error)},
        }

    def transcript_line(self) -> str:
        return json.dumps(self.record(), sort_keys=True)


# --------------------------------------------------------------------------- #
# Event (de)serialization
# --------------------------------------------------------------------------- #


def event_to_dict(event: LifecycleEvent) -> dict:
    subject = event.subject
    if isinstance(subject, ComponentDescriptor):
        subject = {"xml": serialize_descriptor(subject)}
    elif event.kind is EventKind.INSTALL:
        subject = {"xml": subject}
    payload = list(event.payload) if isinstance(event.payload, tuple) else event.payload
    return {"seq": event.sequence_no, "kind": event.kind.value, "subject": subject, "payload": payload}


def event_from_dict(data: Mapping) -> LifecycleEvent:
    kind = EventKind(data["kind"])
    subject = data["subject"]
    if kind is EventKind.INSTALL:
        subject = subject["xml"]
    payload = data.get("payload")
    if isinstance(payload, list):
        payload = tuple(payload)
    return LifecycleEvent(kind, subject, payload, data.get("seq", -1))


class EventLog:
    """Append-only, line-delimited JSON log of dispatched events.

    The first line carries the executive configuration; each further line is
    one event with the state changes it caused.
    """

    def __init__(self, path=None, config: Optional[dict] = None):
        self.path = path
        self.lines: list[str] = []
        self._fh = open(path, "w", encoding="utf-8") if path is not None else None
        self._write(json.dumps({"drcom_log": LOG_FORMAT, "config": config or {}}, sort_keys=True))

    def _write(self, line: str) -> None:
        self.lines.append(line)
        if self._fh is not None:
            self._fh.write(line + "\n")
            self._fh.flush()

    def append(self, result: DispatchResult) -> None:
        record = {"event": event_to_dict(result.event)}
        record.update(result.record())
        self._write(json.dumps(record, sort_keys=True))

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def read_log(source) -> tuple[dict, list[dict]]:
    """Parse a log file (path, text, or lines) into ``(config, records)``."""
    if isinstance(source, (list, tuple)):
        lines = list(source)
    elif isinstance(source, str) and "\n" in source:
        lines = source.splitlines()
    else:
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ValueError("empty event log")
    header = json.loads(lines[0])
    if header.get("drcom_log") != LOG_FORMAT:
        raise ValueError("not an event log")
    return header.get("config", {}), [json.loads(ln) for ln in lines[1:]]


# --------------------------------------------------------------------------- #
# Executive
# --------------------------------------------------------------------------- #


class Executive:
    """Owns the registry, the CPU ledger and the container.

    Args:
        container: execution backend; a fresh :class:`VirtualContainer` by default.
        cap: per-CPU admission threshold.
        policy: internal admission policy, ``"util"`` or ``"rm"``.
        external: optional external resolving service.
        auto_restart: restart instances with a pending start intent as soon
            as they become satisfied again.
        implementations: bincode -> factory map for task bodies.
        resolver_timeout: deadline for external service calls, seconds.
        log: an :class:`EventLog`, a path, or None.
        strict_six: reject names longer than six characters in XML installs.
        check_invariants: verify the global invariants after every dispatch.
    """

    def __init__(
        self,
        *,
        container: Optional[Container] = None,
        cap: float = 1.0,
        policy: str = "util",
        external: Optional[ResolvingService] = None,
        auto_restart: bool = True,
        implementations: Optional[Mapping[str, Callable]] = None,
        resolver_timeout: Optional[float] = DEFAULT_TIMEOUT,
        log: Union[EventLog, str, None] = None,
        strict_six: bool = False,
        check_invariants: bool = False,
        resolver_name: Optional[str] = None,
    ):
        self.registry = Registry()
        self.ledger = CpuBudgetLedger(cap, policy)
        self.container = container if container is not None else VirtualContainer()
        if self.container.on_fault is None:
            self.container.on_fault = self._on_fault
        self.external = external
        self.auto_restart = auto_restart
        self.implementations = dict(implementations or {})
        self.resolver_timeout = resolver_timeout
        self.strict_six = strict_six
        self.check = check_invariants
        self.config = {
            "cap": cap,
            "policy": policy,
            "auto_restart": auto_restart,
            "strict_six": strict_six,
            "resolver": resolver_name,
        }
        if isinstance(log, EventLog):
            self.log = log
        else:
            self.log = EventLog(log, self.config)
        self.history: list[DispatchResult] = []
        self._seq = itertools.count(1)
        self._last_seq = 0
        self._lock = threading.RLock()
        self.fault_sink: Callable[[LifecycleEvent], Any] = self.dispatch

    # ------------------------------------------------------------------ #
    # Public API: one method per event kind
    # ------------------------------------------------------------------ #

    def _do(self, kind: EventKind, subject, payload=None) -> DispatchResult:
        result = self.dispatch(LifecycleEvent(kind, subject, payload))
        if result.error is not None:
            raise result.error
        return result

    def _state_after(self, result: DispatchResult, handle: int) -> LifecycleState:
        return self.registry.get(handle).state if handle in self.registry else S.UNINSTALLED

    def install(self, d: Union[ComponentDescriptor, str]) -> int:
        return self._do(EventKind.INSTALL, d).handle

    def enable(self, handle: int) -> LifecycleState:
        return self._state_after(self._do(EventKind.ENABLE, handle), handle)

    def disable(self, handle: int) -> LifecycleState:
        return self._state_after(self._do(EventKind.DISABLE, handle), handle)

    def start(self, handle: int) -> LifecycleState:
        return self._state_after(self._do(EventKind.START, handle), handle)

    def stop(self, handle: int) -> LifecycleState:
        return self._state_after(self._do(EventKind.STOP, handle), handle)

    def uninstall(self, handle: int) -> None:
        self._do(EventKind.UNINSTALL, handle)

    def suspend(self, handle: int) -> LifecycleState:
        return self._state_after(self._do(EventKind.SUSPEND, handle), handle)

    def resume(self, handle: int) -> LifecycleState:
        return self._state_after(self._do(EventKind.RESUME, handle), handle)

    def set_property(self, handle: int, name: str, value: str) -> None:
        self._do(EventKind.SET_PROPERTY, handle, (name, str(value)))

    # ------------------------------------------------------------------ #
    # Queries
    # ------------------------------------------------------------------ #

    def handle(self, name: str) -> int:
        return self.registry.lookup(name).id

    def state(self, handle_or_name) -> LifecycleState:
        if isinstance(handle_or_name, str):
            return self.registry.lookup(handle_or_name).state
        return self.registry.get(handle_or_name).state

    def status(self, handle: int) -> dict:
        inst = self.registry.get(handle)
        info = {
            "id": inst.id,
            "name": inst.name,
            "state": inst.state.value,
            "enabled": inst.enabled,
            "start_intent": inst.start_intent,
            "cpu": inst.descriptor.cpu,
            "cpu_usage": inst.descriptor.cpu_usage,
            "bindings": [
                f"{b.consumer_port}<-{self.registry.name_of(b.provider)}.{b.provider_port}" for b in inst.bindings
            ],
            "properties": dict(inst.properties),
            "reason": inst.reason,
        }
        if self.container.has_task(handle):
            info["task"] = self.container.task(handle).status.value
        return info

    def query(self, filter: Iterable[tuple[str, str]] = ()):
        return self.registry.query(filter)

    def settled_states(self, handle: int) -> list[LifecycleState]:
        """State of *handle* at the end of every dispatch that changed it."""
        out = []
        for result in self.history:
            mine = [c for c in result.changes if c.handle == handle]
            if mine:
                out.append(mine[-1].new)
        return out

    # ------------------------------------------------------------------ #
    # Dispatch
    # ------------------------------------------------------------------ #

    def next_sequence(self) -> int:
        with self._lock:
            seq = max(next(self._seq), self._last_seq + 1)
            self._last_seq = seq
            return seq

    def dispatch(self, event: LifecycleEvent) -> DispatchResult:
        """Process *event* atomically; errors are reported in the result."""
        with self._lock:
            if event.sequence_no < 0:
                event = replace(event, sequence_no=self.next_sequence())
            else:
                self._last_seq = max(self._last_seq, event.sequence_no)
            result = DispatchResult(event.sequence_no, event)
            try:
                self._handle(event, result)
            except (ExecutiveError, RegistryError, ParseError, ValueError, SpawnFailure) as exc:
                result.error = exc
            self.history.append(result)
            self.log.append(result)
            if self.check:
                self.check_invariants(result)
            return result

    def _handle(self, event: LifecycleEvent, result: DispatchResult) -> None:
        kind = event.kind
        if kind is EventKind.INSTALL:
            self._install(event, result)
            return
        if kind is EventKind.PROVIDER_APPEARED:
            self._settle(result)
            return
        if kind is EventKind.PROVIDER_DEPARTED:
            inst = self.registry.get(event.subject) if event.subject in self.registry else None
            if inst is not None and inst.state in PROVIDING:
                inst.start_intent = False
                reason = f"departed: {event.payload}" if event.payload else "departed"
                self._depart(inst, S.UNSATISFIED, reason, event, result)
            self._settle(result)
            return

        inst = self.registry.get(event.subject)
        if kind is EventKind.ENABLE:
            self._enable(inst, result)
        elif kind is EventKind.DISABLE:
            self._disable(inst, event, result)
        elif kind is EventKind.START:
            self._start(inst, result)
        elif kind is EventKind.STOP:
            if inst.state not in PROVIDING:
                raise WrongState(f"{inst.name} is {inst.state}; only ACTIVE or SUSPENDED instances can be stopped")
            inst.start_intent = False
            self._depart(inst, None, "stopped", event, result)
            self._settle(result)
        elif kind is EventKind.UNINSTALL:
            self._uninstall(inst, event, result)
        elif kind is EventKind.SUSPEND:
            if inst.state is not S.ACTIVE:
                raise WrongState(f"{inst.name} is {inst.state}; only ACTIVE instances can be suspended")
            self._post(inst.id, Suspend())
            self._transition(inst, S.SUSPENDED, "suspended", result)
        elif kind is EventKind.RESUME:
            if inst.state is not S.SUSPENDED:
                raise WrongState(f"{inst.name} is {inst.state}; only SUSPENDED instances can be resumed")
            self._post(inst.id, Resume())
            self._transition(inst, S.ACTIVE, "resumed", result)
        elif kind is EventKind.SET_PROPERTY:
            self._set_property(inst, event.payload)
        else:  # pragma: no cover - every kind is handled above
            raise ExecutiveError(f"unhandled event {kind}")

    # ------------------------------------------------------------------ #
    # Handlers
    # ------------------------------------------------------------------ #

    def _install(self, event: LifecycleEvent, result: DispatchResult) -> None:
        d = event.subject
        if isinstance(d, str):
            d = parse_descriptor(d, strict_six=self.strict_six)
        inst = self.registry.register(d)
        result.handle = inst.id
        if inst.enabled:
            self._transition(inst, S.UNSATISFIED, "resolving", result)
            self._settle(result)

    def _enable(self, inst: ComponentInstance, result: DispatchResult) -> None:
        if inst.state is S.REGISTERED:
            inst.enabled = True
            self._transition(inst, S.UNSATISFIED, "resolving", result)
        elif inst.state is S.UNSATISFIED and not inst.enabled:
            inst.enabled = True
        else:
            raise WrongState(f"{inst.name} is {inst.state} and enabled; nothing to enable")
        self._settle(result)

    def _disable(self, inst: ComponentInstance, event: LifecycleEvent, result: DispatchResult) -> None:
        inst.start_intent = False
        if inst.state in PROVIDING:
            inst.enabled = False
            self._depart(inst, S.UNSATISFIED, "disabled", event, result)
            self._settle(result)
        elif inst.state is S.SATISFIED:
            inst.enabled = False
            self._transition(inst, S.UNSATISFIED, "disabled", result)
        elif inst.state in (S.UNSATISFIED, S.REGISTERED):
            inst.enabled = False
            inst.reason = "disabled"

    def _start(self, inst: ComponentInstance, result: DispatchResult) -> None:
        if inst.state is S.UNSATISFIED and inst.enabled:
            inst.start_intent = True
            raise WrongState(
                f"{inst.name} is UNSATISFIED ({inst.reason}); start deferred until it is satisfied"
            )
        if inst.state is not S.SATISFIED:
            raise WrongState(f"{inst.name} is {inst.state}; only SATISFIED instances can be started")
        if not self._activate(inst, result):
            raise AdmissionRejected(f"{inst.name}: {inst.reason}")
        inst.start_intent = True
        self._settle(result)

    def _uninstall(self, inst: ComponentInstance, event: LifecycleEvent, result: DispatchResult) -> None:
        inst.start_intent = False
        if inst.state in PROVIDING:
            self._depart(inst, S.UNINSTALLED, "uninstalled", event, result)
        else:
            self._transition(inst, S.UNINSTALLED, "uninstalled", result)
        self.registry.unregister(inst.id)
        self._settle(result)

    def _set_property(self, inst: ComponentInstance, payload) -> None:
        name, value = payload
        declared = {p.name: p for p in inst.descriptor.properties}
        if name in declared:
            try:
                _parse_typed(declared[name].value_type, value)
            except ValueError:
                raise InvalidValue(f"property.{name}", value, f"not a {declared[name].value_type.value}") from None
        inst.properties[name] = value
        self.registry.publish(inst.id)
        if self.container.has_task(inst.id):
            self._post(inst.id, SetProperty(name, value))

    # ------------------------------------------------------------------ #
    # Building blocks
    # ------------------------------------------------------------------ #

    def _post(self, handle: int, cmd) -> None:
        try:
            self.container.post_command(handle, cmd)
        except UnknownTask:
            logger.warning("no live task for %s; %s dropped", handle, type(cmd).__name__)

    def _transition(self, inst: ComponentInstance, new: LifecycleState, reason: str, result: DispatchResult) -> None:
        old = inst.state
        if not is_legal(old, new):
            raise IllegalTransition(f"{inst.name}: {old} -> {new}")
        self.registry.set_state(inst.id, new)
        inst.reason = reason
        result.changes.append(StateChange(inst.id, inst.name, old, new, reason))

    def _try_satisfy(self, inst: ComponentInstance, result: DispatchResult) -> bool:
        snapshot = self.registry.snapshot()
        resolution = resolve_functional(inst.id, snapshot)
        if isinstance(resolution, UnsatisfiedReport):
            inst.reason = str(resolution)
            return False
        decision = admit(inst.id, self.ledger, self.external, snapshot, self.resolver_timeout)
        if not decision.admitted:
            inst.reason = decision.reason
            return False
        self._transition(inst, S.SATISFIED, "resolved", result)
        inst.bindings = list(resolution)
        return True

    def _activate(self, inst: ComponentInstance, result: DispatchResult) -> bool:
        """SATISFIED -> ACTIVE, or -> UNSATISFIED if admission fails now."""
        snapshot = self.registry.snapshot()
        resolution = resolve_functional(inst.id, snapshot)
        if isinstance(resolution, UnsatisfiedReport):
            self._transition(inst, S.UNSATISFIED, str(resolution), result)
            return False
        decision = admit(inst.id, self.ledger, self.external, snapshot, self.resolver_timeout)
        if not decision.admitted:
            self._transition(inst, S.UNSATISFIED, decision.reason, result)
            return False
        d = inst.descriptor
        self.ledger.commit(inst.id, d.cpu, d.cpu_usage)
        inst.bindings = list(resolution)
        try:
            body = load_body(d.bincode, self.implementations)
            self.container.activate(inst.id, d, inst.bindings, inst.properties, body)
        except Exception as exc:
            self.ledger.release(inst.id)
            self._transition(inst, S.UNSATISFIED, f"spawn failed: {exc}", result)
            return False
        self._transition(inst, S.ACTIVE, "started", result)
        inst.bindings = list(resolution)
        return True

    def _depart(
        self,
        inst: ComponentInstance,
        target: Optional[LifecycleState],
        reason: str,
        event: LifecycleEvent,
        result: DispatchResult,
    ) -> None:
        """Take a providing instance out of service and deal with the fallout.

        *target* None means "SATISFIED if still resolvable, else UNSATISFIED".
        Consumers stranded by the departure are deactivated in cascade order;
        their tasks are terminated before the provider's so none of them is
        left reading a channel whose writer is gone.
        """
        snapshot = self.registry.snapshot()
        cascade = cascade_unsatisfied(inst.id, snapshot, self.external, event, self.resolver_timeout)

        for handle in reversed(cascade):
            self._release(handle)
        self._release(inst.id)

        cascade_changes = []
        for handle in cascade:
            member = self.registry.get(handle)
            old = member.state
            self.registry.set_state(handle, S.UNSATISFIED)
            member.reason = f"provider departed: {inst.name}"
            cascade_changes.append(StateChange(handle, member.name, old, S.UNSATISFIED, member.reason))

        if target is None:
            after = self.registry.snapshot().with_state(inst.id, S.UNSATISFIED)
            resolution = resolve_functional(inst.id, after)
            target = S.UNSATISFIED
            if not isinstance(resolution, UnsatisfiedReport):
                decision = admit(inst.id, self.ledger, self.external, after, self.resolver_timeout)
                if decision.admitted:
                    target = S.SATISFIED
                else:
                    reason = f"{reason}; {decision.reason}"
            else:
                reason = f"{reason}; {resolution}"
        else:
            resolution = None
        self._transition(inst, target, reason, result)
        if target is S.SATISFIED:
            inst.bindings = list(resolution)
        result.changes.extend(cascade_changes)
        self._repair_bindings(result)

    def _release(self, handle: int) -> None:
        self.ledger.release(handle)
        if self.container.has_task(handle):
            self.container.deactivate(handle)

    def _repair_bindings(self, result: DispatchResult) -> None:
        """Rebind survivors whose provider left; demote those that cannot be."""
        while True:
            providing = {i.id for i in self.registry if i.state in PROVIDING}
            stale = [
                i for i in self.registry
                if i.state in PUBLISHED and any(b.provider not in providing for b in i.bindings)
            ]
            if not stale:
                return
            demoted = False
            for inst in stale:
                resolution = resolve_functional(inst.id, self.registry.snapshot())
                if isinstance(resolution, UnsatisfiedReport):
                    if inst.state in PROVIDING:
                        self._release(inst.id)
                    self._transition(inst, S.UNSATISFIED, str(resolution), result)
                    demoted = True
                    continue
                old = {b.consumer_port: b for b in inst.bindings}
                for b in resolution:
                    if old.get(b.consumer_port) != b:
                        result.rebinds.append(b)
                        if inst.state in PROVIDING and self.container.has_task(inst.id):
                            self.container.rebind(b)
                inst.bindings = list(resolution)
            if not demoted:
                return

    def _settle(self, result: DispatchResult) -> None:
        """Re-resolve waiting instances and honour pending start intents."""
        attempted: set[int] = set()
        progress = True
        while progress:
            progress = False
            for inst in list(self.registry):
                if inst.id in attempted:
                    continue
                if inst.state is S.UNSATISFIED and inst.enabled:
                    if not self._try_satisfy(inst, result):
                        continue
                    progress = True
                if inst.state is S.SATISFIED and inst.start_intent and self.auto_restart:
                    attempted.add(inst.id)
                    self._activate(inst, result)
                    progress = True
                elif inst.state is S.SATISFIED:
                    attempted.add(inst.id)

    def _on_fault(self, handle: int, exc: BaseException) -> None:
        self.fault_sink(
            LifecycleEvent(EventKind.PROVIDER_DEPARTED, handle, f"fault: {type(exc).__name__}: {exc}")
        )

    # ------------------------------------------------------------------ #
    # Invariants
    # ------------------------------------------------------------------ #

    def check_invariants(self, result: Optional[DispatchResult] = None) -> None:
        """Raise AssertionError if the global view is inconsistent."""
        providing = {i.id for i in self.registry if i.state in PROVIDING}
        for inst in self.registry:
            if inst.state in PROVIDING:
                bound = {b.consumer_port for b in inst.bindings}
                want = {p.name for p in inst.descriptor.inports}
                assert bound == want, f"{inst.name} is {inst.state} with unbound inports {want - bound}"
                for b in inst.bindings:
                    assert b.provider in providing, f"{inst.name} bound to non-providing {b.provider}"
        cpus = {i.descriptor.cpu for i in self.registry if i.state in PROVIDING} | set(self.ledger.per_cpu_load)
        for cpu in cpus:
            expected = math.fsum(
                i.descriptor.cpu_usage
                for i in self.registry
                if i.state in PROVIDING and i.descriptor.cpu == cpu
            )
            assert self.ledger.load(cpu) == expected, f"ledger cpu{cpu}: {self.ledger.load(cpu)} != {expected}"
        published = {i.id for i in self.registry if i.state in PUBLISHED}
        assert {r.component_id for r in self.registry.records()} == published, "service records out of sync"
        if result is not None:
            for change in result.changes:
                assert is_legal(change.old, change.new), f"illegal transition {change}"


# --------------------------------------------------------------------------- #
# Replay
# --------------------------------------------------------------------------- #


def executive_from_config(config: Mapping, **overrides) -> Executive:
    from .resolver import load_resolving_service

    kwargs = {
        "cap": config.get("cap", 1.0),
        "policy": config.get("policy", "util"),
        "auto_restart": config.get("auto_restart", True),
        "strict_six": config.get("strict_six", False),
        "resolver_name": config.get("resolver"),
    }
    if config.get("resolver") and "external" not in overrides:
        kwargs["external"] = load_resolving_service(config["resolver"])
    kwargs.update(overrides)
    return Executive(**kwargs)


@dataclass
class ReplayReport:
    expected: list[str]
    actual: list[str]

    @property
    def identical(self) -> bool:
        return self.expected == self.actual

    def first_mismatch(self) -> Optional[int]:
        for i, (a, b) in enumerate(zip(self.expected, self.actual)):
            if a != b:
                return i
        if len(self.expected) != len(self.actual):
            return min(len(self.expected), len(self.actual))
        return None


def replay(source, **overrides) -> ReplayReport:
    """Re-dispatch every logged event on a fresh executive and compare outcomes."""
    config, records = read_log(source)
    executive = executive_from_config(config, **overrides)
    expected, actual = [], []
    for record in records:
        event = event_from_dict(record["event"])
        result = executive.dispatch(event)
        logged = {k: record[k] for k in ("seq", "handle", "changes", "rebinds", "error")}
        expected.append(json.dumps(logged, sort_keys=True))
        actual.append(result.transcript_line())
    return ReplayReport(expected, actual)


# --------------------------------------------------------------------------- #
# Event loop
# --------------------------------------------------------------------------- #


class EventLoop:
    """Serializes submissions from any thread onto one executive thread.

    Events are numbered at submission time and processed in that order, so
    concurrent submitters get the same outcome as the equivalent sequence of
    direct calls. ``call`` runs an arbitrary callable on the loop thread,
    which is how clients advance virtual time or read state safely.
    """

    _STOP = object()

    def __init__(self, executive: Executive):
        self.executive = executive
        self._queue: queue.Queue = queue.Queue()
        self._submit_lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None
        executive.fault_sink = self.submit

    def start(self) -> "EventLoop":
        if self._thread is None:
            self._thread = threading.Thread(target=self._run, name="drcom-executive", daemon=True)
            self._thread.start()
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self._queue.put((self._STOP, None))
            self._thread.join()
            self._thread = None

    def __enter__(self) -> "EventLoop":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def submit(self, event: LifecycleEvent) -> Future:
        future: Future = Future()
        with self._submit_lock:
            if event.sequence_no < 0:
                event = replace(event, sequence_no=self.executive.next_sequence())
            self._queue.put((event, future))
        return future

    def call(self, fn: Callable, *args, **kwargs) -> Future:
        future: Future = Future()
        self._queue.put(((fn, args, kwargs), future))
        return future

    def _run(self) -> None:
        while True:
            item, future = self._queue.get()
            if item is self._STOP:
                return
            try:
                if isinstance(item, LifecycleEvent):
                    value = self.executive.dispatch(item)
                else:
                    fn, args, kwargs = item
                    value = fn(*args, **kwargs)
            except BaseException as exc:  # delivered to the submitter
                if future is not None:
                    future.set_exception(exc)
                continue
            if future is not None:
                future.set_result(value)
