"""
Functional and non-functional constraint resolution.

Functional resolution wires every inport of a candidate to a compatible
outport of a providing (active or suspended) instance. Non-functional
admission consults the internal CPU budget policy and, when installed, an
external :class:`ResolvingService`; a candidate is admitted only when both
agree.
"""

from __future__ import annotations

import concurrent.futures
import importlib
import logging
import math
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence, runtime_checkable

from .descriptor import ComponentDescriptor, Interface, PortSpec
from .lifecycle import PROVIDING, LifecycleEvent
from .registry import InstanceView, RegistrySnapshot

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 0.1


@dataclass(frozen=True)
class Binding:
    consumer: int
    consumer_port: str
    provider: int
    provider_port: str
    channel_kind: Interface

    def to_dict(self) -> dict:
        return {
            "consumer": self.consumer,
            "consumer_port": self.consumer_port,
            "provider": self.provider,
            "provider_port": self.provider_port,
            "channel_kind": self.channel_kind.value,
        }


@dataclass(frozen=True)
class UnsatisfiedReport:
    candidate: int
    unmatched: tuple[str, ...]

    def __str__(self) -> str:
        return "no provider for " + ", ".join(self.unmatched)


@dataclass(frozen=True)
class AdmissionDecision:
    admitted: bool
    internal_verdict: bool
    external_verdict: bool
    reason: str


def ports_compatible(required: PortSpec, provided: PortSpec) -> bool:
    """An inport matches an outport iff name, interface, type and size agree."""
    return (
        required.name == provided.name
        and required.interface is provided.interface
        and required.data_type is provided.data_type
        and required.size == provided.size
    )


def resolve_functional(candidate: int, snapshot: RegistrySnapshot):
    """Bind each inport of *candidate* to the lowest-id compatible provider.

    Returns a list of :class:`Binding` (empty for components without
    inports) or an :class:`UnsatisfiedReport` naming every unmatched inport.
    """
    view = snapshot.get(candidate)
    providers = [p for p in snapshot.providers() if p.id != candidate]
    bindings = []
    unmatched = []
    for inport in view.descriptor.inports:
        match = None
        for provider in providers:
            for outport in provider.descriptor.outports:
                if ports_compatible(inport, outport):
                    match = Binding(candidate, inport.name, provider.id, outport.name, inport.interface)
                    break
            if match is not None:
                break
        if match is None:
            unmatched.append(inport.name)
        else:
            bindings.append(match)
    if unmatched:
        return UnsatisfiedReport(candidate, tuple(unmatched))
    return bindings


# --------------------------------------------------------------------------- #
# CPU budget
# --------------------------------------------------------------------------- #


def rm_bound(n: int) -> float:
    """Liu & Layland utilization bound for *n* rate-monotonic tasks."""
    if n <= 0:
        return 1.0
    return n * (2.0 ** (1.0 / n) - 1.0)


class CpuBudgetLedger:
    """Per-CPU record of committed CPU claims.

    Loads are recomputed from the committed entries with ``math.fsum`` so the
    ledger never drifts from the exact sum of the active set, however many
    commit/release cycles it goes through.

    Args:
        cap: admission threshold per CPU, in (0, 1].
        policy: ``"util"`` (sum of claims <= cap) or ``"rm"`` (sum of claims
            <= min(cap, n(2^(1/n) - 1)) over the n claiming tasks on the CPU).
    """

    POLICIES = ("util", "rm")

    def __init__(self, cap: float = 1.0, policy: str = "util"):
        if not 0.0 < cap <= 1.0:
            raise ValueError(f"cap must lie in (0, 1], got {cap}")
        if policy not in self.POLICIES:
            raise ValueError(f"unknown policy {policy!r}; expected one of {self.POLICIES}")
        self.cap = cap
        self.policy = policy
        self._entries: dict[int, tuple[int, float]] = {}

    def __contains__(self, handle) -> bool:
        return handle in self._entries

    def commit(self, handle: int, cpu: int, usage: float) -> None:
        if handle in self._entries:
            raise ValueError(f"instance {handle} already holds a reservation")
        self._entries[handle] = (cpu, usage)

    def release(self, handle: int) -> None:
        self._entries.pop(handle, None)

    def claims(self, cpu: int) -> list[float]:
        return [u for h, (c, u) in sorted(self._entries.items()) if c == cpu]

    def load(self, cpu: int) -> float:
        return math.fsum(self.claims(cpu))

    @property
    def per_cpu_load(self) -> dict[int, float]:
        cpus = sorted({c for c, _ in self._entries.values()})
        return {c: self.load(c) for c in cpus}

    def limit(self, cpu: int, extra_tasks: int = 0) -> float:
        if self.policy == "util":
            return self.cap
        n = sum(1 for u in self.claims(cpu) if u > 0) + extra_tasks
        return min(self.cap, rm_bound(n))

    def fits(self, cpu: int, usage: float) -> tuple[bool, str]:
        if usage == 0:
            return True, "ok: claims no CPU"
        total = math.fsum(self.claims(cpu) + [usage])
        limit = self.limit(cpu, extra_tasks=1)
        if total <= limit:
            return True, f"ok: cpu{cpu} load {total:.6g} <= {limit:.6g}"
        return False, f"cpu-budget: cpu{cpu} load would be {total:.6g} > {limit:.6g} ({self.policy})"


def admit_internal(candidate: ComponentDescriptor, ledger: CpuBudgetLedger) -> tuple[bool, str]:
    """Internal policy verdict. Does not touch the ledger."""
    return ledger.fits(candidate.cpu, candidate.cpu_usage)


# --------------------------------------------------------------------------- #
# External resolving services
# --------------------------------------------------------------------------- #


@runtime_checkable
class ResolvingService(Protocol):
    def on_admit(self, candidate: InstanceView, system_view: RegistrySnapshot) -> bool: ...

    def on_change(self, event: Optional[LifecycleEvent], system_view: RegistrySnapshot) -> list[int]: ...


class AcceptAll:
    """External service that agrees with everything."""

    def on_admit(self, candidate, system_view):
        return True

    def on_change(self, event, system_view):
        return []


class RejectAll(AcceptAll):
    def on_admit(self, candidate, system_view):
        return False


class ExternalServiceFailure(RuntimeError):
    code = "ExternalServiceFailure"


_pool_lock = threading.Lock()
_pool: Optional[concurrent.futures.ThreadPoolExecutor] = None


def _executor() -> concurrent.futures.ThreadPoolExecutor:
    global _pool
    with _pool_lock:
        if _pool is None:
            _pool = concurrent.futures.ThreadPoolExecutor(max_workers=8, thread_name_prefix="resolver")
        return _pool


def call_external(fn, *args, timeout: Optional[float] = DEFAULT_TIMEOUT):
    """Run *fn* with a deadline; raise ExternalServiceFailure on error or overrun."""
    if timeout is None:
        try:
            return fn(*args)
        except Exception as exc:
            raise ExternalServiceFailure(f"{type(exc).__name__}: {exc}") from exc
    future = _executor().submit(fn, *args)
    try:
        return future.result(timeout=timeout)
    except concurrent.futures.TimeoutError:
        raise ExternalServiceFailure(f"no answer within {timeout * 1000:.0f} ms") from None
    except Exception as exc:
        raise ExternalServiceFailure(f"{type(exc).__name__}: {exc}") from exc


def admit(
    candidate: int,
    ledger: CpuBudgetLedger,
    external: Optional[ResolvingService],
    snapshot: RegistrySnapshot,
    timeout: Optional[float] = DEFAULT_TIMEOUT,
) -> AdmissionDecision:
    """Consult the internal policy and the external service (if any).

    An external service that raises or overruns *timeout* vetoes admission.
    """
    view = snapshot.get(candidate)
    internal, internal_reason = admit_internal(view.descriptor, ledger)
    if external is None:
        external_verdict, external_reason = True, "no external service"
    else:
        try:
            external_verdict = bool(call_external(external.on_admit, view, snapshot, timeout=timeout))
            external_reason = "external: accepted" if external_verdict else "external: rejected"
        except ExternalServiceFailure as exc:
            external_verdict, external_reason = False, f"external: failure ({exc})"
    admitted = internal and external_verdict
    if admitted:
        reason = "admitted"
    elif not internal and not external_verdict:
        reason = f"{internal_reason}; {external_reason}"
    elif not internal:
        reason = internal_reason
    else:
        reason = external_reason
    return AdmissionDecision(admitted, internal, external_verdict, reason)


# --------------------------------------------------------------------------- #
# Cascades
# --------------------------------------------------------------------------- #


def _waves(
    seeds: Sequence[int],
    alive: set[int],
    support: dict[tuple[int, str], set[int]],
    dependents: dict[int, list[tuple[int, str]]],
) -> list[int]:
    """Propagate removals through the support sets; mutates its arguments."""
    order: list[int] = []
    current = list(seeds)
    while current:
        nxt = set()
        for gone in current:
            for consumer, port in dependents.get(gone, ()):
                if consumer not in alive:
                    continue
                providers = support[(consumer, port)]
                providers.discard(gone)
                if not providers:
                    nxt.add(consumer)
        wave = sorted(nxt)
        alive.difference_update(wave)
        order.extend(wave)
        current = wave
    return order


def cascade_unsatisfied(
    departed: int,
    snapshot: RegistrySnapshot,
    external: Optional[ResolvingService] = None,
    event: Optional[LifecycleEvent] = None,
    timeout: Optional[float] = DEFAULT_TIMEOUT,
) -> list[int]:
    """Instances that lose functional satisfaction once *departed* is gone.

    The result is ordered in waves: first the direct consumers that are left
    without any compatible provider, then the consumers those leave stranded,
    and so on; each wave is sorted by id. Instances named by the external
    service's ``on_change`` are appended as a further wave together with
    whatever they strand in turn.
    """
    views = {v.id: v for v in snapshot.providers()}
    alive = set(views) - {departed}

    support: dict[tuple[int, str], set[int]] = {}
    dependents: dict[int, list[tuple[int, str]]] = {}
    for cid in sorted(views):
        for inport in views[cid].descriptor.inports:
            providers = set()
            for pid in sorted(views):
                if pid == cid:
                    continue
                if any(ports_compatible(inport, out) for out in views[pid].descriptor.outports):
                    providers.add(pid)
                    dependents.setdefault(pid, []).append((cid, inport.name))
            support[(cid, inport.name)] = providers

    # Consumers already lacking support fall in the first wave too.
    orphaned = sorted(
        cid
        for (cid, port), provs in support.items()
        if cid in alive and not (provs - {departed})
    )
    first = set(orphaned)
    for consumer, port in dependents.get(departed, ()):
        support[(consumer, port)].discard(departed)
        if consumer in alive and not support[(consumer, port)]:
            first.add(consumer)
    first_wave = sorted(first)
    alive.difference_update(first_wave)
    order = first_wave + _waves(first_wave, alive, support, dependents)

    if external is not None:
        try:
            named = call_external(external.on_change, event, snapshot, timeout=timeout) or []
        except ExternalServiceFailure as exc:
            logger.warning("external on_change failed, ignoring: %s", exc)
            named = []
        extra = sorted({h for h in named if h in alive})
        if extra:
            alive.difference_update(extra)
            order.extend(extra)
            order.extend(_waves(extra, alive, support, dependents))
    return order


# --------------------------------------------------------------------------- #
# Plug-in loading
# --------------------------------------------------------------------------- #

BUILTIN_SERVICES = {
    "accept": AcceptAll,
    "reject": RejectAll,
}


def load_resolving_service(name: str) -> ResolvingService:
    """Instantiate a service by built-in name or ``module:attr`` / ``module.attr`` path."""
    if name in BUILTIN_SERVICES:
        return BUILTIN_SERVICES[name]()
    if ":" in name:
        module_name, attr = name.split(":", 1)
    elif "." in name:
        module_name, attr = name.rsplit(".", 1)
    else:
        raise ValueError(f"unknown resolving service {name!r}")
    target = getattr(importlib.import_module(module_name), attr)
    service = target() if isinstance(target, type) else target
    if not isinstance(service, ResolvingService):
        raise TypeError(f"{name!r} does not implement on_admit/on_change")
    return service


def unsatisfied_consumers(snapshot: RegistrySnapshot, gone: Iterable[int]) -> list[int]:
    """Providing instances holding a binding to any handle in *gone*."""
    gone = set(gone)
    return [
        v.id
        for v in snapshot
        if v.state in PROVIDING and any(b.provider in gone for b in v.bindings)
    ]


__all__ = [
    "Binding",
    "UnsatisfiedReport",
    "AdmissionDecision",
    "CpuBudgetLedger",
    "ResolvingService",
    "AcceptAll",
    "RejectAll",
    "ExternalServiceFailure",
    "ports_compatible",
    "resolve_functional",
    "admit_internal",
    "admit",
    "cascade_unsatisfied",
    "rm_bound",
    "call_external",
    "load_resolving_service",
]
