"""Lifecycle states, events and the state changes they cause."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional


class LifecycleState(Enum):
    REGISTERED = "REGISTERED"
    UNSATISFIED = "UNSATISFIED"
    SATISFIED = "SATISFIED"
    ACTIVE = "ACTIVE"
    SUSPENDED = "SUSPENDED"
    UNINSTALLED = "UNINSTALLED"

    def __str__(self) -> str:
        return self.value


S = LifecycleState

#: Every legal edge. ACTIVE/SUSPENDED -> SATISFIED is the plain "stop" edge.
TRANSITIONS: dict[LifecycleState, frozenset[LifecycleState]] = {
    S.REGISTERED: frozenset({S.UNSATISFIED, S.UNINSTALLED}),
    S.UNSATISFIED: frozenset({S.SATISFIED, S.UNINSTALLED}),
    S.SATISFIED: frozenset({S.ACTIVE, S.UNSATISFIED, S.UNINSTALLED}),
    S.ACTIVE: frozenset({S.SUSPENDED, S.SATISFIED, S.UNSATISFIED, S.UNINSTALLED}),
    S.SUSPENDED: frozenset({S.ACTIVE, S.SATISFIED, S.UNSATISFIED, S.UNINSTALLED}),
    S.UNINSTALLED: frozenset(),
}

#: States whose instances publish a management service record.
PUBLISHED = frozenset({S.SATISFIED, S.ACTIVE, S.SUSPENDED})
#: States whose instances provide their outports and hold a CPU reservation.
PROVIDING = frozenset({S.ACTIVE, S.SUSPENDED})


def is_legal(old: LifecycleState, new: LifecycleState) -> bool:
    return new in TRANSITIONS[old]


class EventKind(Enum):
    INSTALL = "Install"
    ENABLE = "Enable"
    DISABLE = "Disable"
    START = "Start"
    STOP = "Stop"
    UNINSTALL = "Uninstall"
    PROVIDER_APPEARED = "ProviderAppeared"
    PROVIDER_DEPARTED = "ProviderDeparted"
    SET_PROPERTY = "SetProperty"
    SUSPEND = "Suspend"
    RESUME = "Resume"


@dataclass(frozen=True)
class LifecycleEvent:
    """One externally submitted event.

    ``subject`` is an instance handle, except for ``INSTALL`` where it is the
    descriptor (or its XML text). ``payload`` carries ``(name, value)`` for
    ``SET_PROPERTY`` and a free-form reason for ``PROVIDER_DEPARTED``.
    """

    kind: EventKind
    subject: Any
    payload: Optional[Any] = None
    sequence_no: int = -1


@dataclass(frozen=True)
class StateChange:
    handle: int
    name: str
    old: LifecycleState
    new: LifecycleState
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "handle": self.handle,
            "name": self.name,
            "old": self.old.value,
            "new": self.new.value,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StateChange":
        return cls(
            data["handle"],
            data["name"],
            LifecycleState(data["old"]),
            LifecycleState(data["new"]),
            data.get("reason", ""),
        )

    def __str__(self) -> str:
        tail = f" ({self.reason})" if self.reason else ""
        return f"{self.name}[{self.handle}]: {self.old} -> {self.new}{tail}"
