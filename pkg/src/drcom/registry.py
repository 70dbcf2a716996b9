"""
The executive's global view of installed components.

The registry stores one :class:`ComponentInstance` per installed descriptor
and publishes a :class:`ServiceRecord` for every instance that is satisfied,
active or suspended, so management clients can locate components by their
declared properties.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional

from .descriptor import ComponentDescriptor, Direction, PortSpec
from .lifecycle import PROVIDING, PUBLISHED, LifecycleState


class RegistryError(Exception):
    code = "RegistryError"


class DuplicateName(RegistryError):
    code = "DuplicateName"


class UnknownId(RegistryError, KeyError):
    code = "UnknownId"

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown id"


class StillActive(RegistryError):
    code = "StillActive"


@dataclass
class ComponentInstance:
    id: int
    descriptor: ComponentDescriptor
    state: LifecycleState = LifecycleState.REGISTERED
    bindings: list = field(default_factory=list)
    enabled: bool = True
    start_intent: bool = False
    properties: dict[str, str] = field(default_factory=dict)
    reason: str = ""

    @property
    def name(self) -> str:
        return self.descriptor.name

    def binding_for(self, port: str):
        for b in self.bindings:
            if b.consumer_port == port:
                return b
        return None


@dataclass(frozen=True)
class ServiceRecord:
    component_id: int
    properties: Mapping[str, str]


@dataclass(frozen=True)
class InstanceView:
    """Immutable copy of an instance, as seen by resolvers."""

    id: int
    descriptor: ComponentDescriptor
    state: LifecycleState
    enabled: bool
    bindings: tuple

    @property
    def name(self) -> str:
        return self.descriptor.name


class RegistrySnapshot:
    """Read-only, point-in-time view of the registry."""

    def __init__(self, views: Iterable[InstanceView]):
        self._views = {v.id: v for v in views}

    def __iter__(self) -> Iterator[InstanceView]:
        return iter(sorted(self._views.values(), key=lambda v: v.id))

    def __len__(self) -> int:
        return len(self._views)

    def __contains__(self, handle) -> bool:
        return handle in self._views

    def get(self, handle: int) -> InstanceView:
        try:
            return self._views[handle]
        except KeyError:
            raise UnknownId(handle) from None

    def providers(self) -> list[InstanceView]:
        return [v for v in self if v.state in PROVIDING]

    def with_state(self, handle: int, state: LifecycleState) -> "RegistrySnapshot":
        views = dict(self._views)
        views[handle] = replace(views[handle], state=state)
        return RegistrySnapshot(views.values())


def _record_properties(instance: ComponentInstance) -> dict[str, str]:
    props = dict(instance.properties)
    props["name"] = instance.descriptor.name
    props["type"] = instance.descriptor.task_type.value
    return props


class Registry:
    """Instance store. Mutated only from the executive's event loop."""

    def __init__(self):
        self._instances: dict[int, ComponentInstance] = {}
        self._by_name: dict[str, int] = {}
        self._records: dict[int, ServiceRecord] = {}
        self._ids = itertools.count(1)

    def __len__(self) -> int:
        return len(self._instances)

    def __iter__(self) -> Iterator[ComponentInstance]:
        return iter(sorted(self._instances.values(), key=lambda i: i.id))

    def __contains__(self, handle) -> bool:
        return handle in self._instances

    def register(self, d: ComponentDescriptor) -> ComponentInstance:
        if d.name in self._by_name:
            raise DuplicateName(f"a component named {d.name!r} is already installed")
        instance = ComponentInstance(
            id=next(self._ids),
            descriptor=d,
            enabled=d.enabled,
            properties={p.name: p.value for p in d.properties},
        )
        self._instances[instance.id] = instance
        self._by_name[d.name] = instance.id
        return instance

    def unregister(self, handle: int) -> None:
        instance = self.get(handle)
        if instance.state in PROVIDING:
            raise StillActive(f"{instance.name} is {instance.state}; stop it first")
        del self._instances[handle]
        del self._by_name[instance.name]
        self._records.pop(handle, None)

    def get(self, handle: int) -> ComponentInstance:
        try:
            return self._instances[handle]
        except KeyError:
            raise UnknownId(f"no instance with id {handle}") from None

    def lookup(self, name: str) -> ComponentInstance:
        try:
            return self._instances[self._by_name[name]]
        except KeyError:
            raise UnknownId(f"no instance named {name!r}") from None

    def set_state(self, handle: int, state: LifecycleState) -> None:
        instance = self.get(handle)
        instance.state = state
        if state not in PUBLISHED:
            instance.bindings = []
        self.publish(handle)

    def publish(self, handle: int) -> None:
        """Bring the service record of *handle* in line with its state."""
        instance = self._instances.get(handle)
        if instance is not None and instance.state in PUBLISHED:
            self._records[handle] = ServiceRecord(
                handle, MappingProxyType(_record_properties(instance))
            )
        else:
            self._records.pop(handle, None)

    def records(self) -> list[ServiceRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def query(self, filter: Iterable[tuple[str, str]] = ()) -> list[ServiceRecord]:
        """Records whose properties contain every ``(key, value)`` pair."""
        pairs = list(filter)
        return [
            r
            for r in self.records()
            if all(key in r.properties and r.properties[key] == value for key, value in pairs)
        ]

    def find_provider(self, p: PortSpec) -> list[tuple[int, PortSpec]]:
        """Outports of providing instances that could serve inport *p*."""
        from .resolver import ports_compatible

        if p.direction is not Direction.IN:
            raise ValueError("find_provider expects an inport")
        found = []
        for instance in self:
            if instance.state not in PROVIDING:
                continue
            for out in instance.descriptor.outports:
                if ports_compatible(p, out):
                    found.append((instance.id, out))
        return found

    def snapshot(self) -> RegistrySnapshot:
        return RegistrySnapshot(
            InstanceView(i.id, i.descriptor, i.state, i.enabled, tuple(i.bindings))
            for i in self._instances.values()
        )

    def name_of(self, handle: int) -> Optional[str]:
        instance = self._instances.get(handle)
        return instance.name if instance else None
