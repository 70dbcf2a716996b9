"""Task control blocks, task bodies and latency samples."""

from __future__ import annotations

import importlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional

logger = logging.getLogger(__name__)


class TaskStatus(Enum):
    RUNNING = "Running"
    SUSPENDED = "Suspended"
    TERMINATING = "Terminating"
    TERMINATED = "Terminated"


@dataclass
class TaskControlBlock:
    component_id: int
    period_ns: Optional[int]  # None for aperiodic tasks
    priority: int
    cpu: int = 0
    name: str = ""
    status: TaskStatus = TaskStatus.RUNNING
    next_release: int = 0
    trigger_port: Optional[str] = None  # aperiodic: mailbox inport that releases a step

    @property
    def periodic(self) -> bool:
        return self.period_ns is not None


@dataclass(frozen=True)
class LatencySample:
    task: int
    release_expected: int
    release_actual: int

    @property
    def latency_ns(self) -> int:
        return self.release_actual - self.release_expected


@dataclass
class TaskContext:
    """What a task body sees on every call."""

    component_id: int
    name: str
    ports: dict
    properties: dict[str, str]
    period_ns: Optional[int]
    emit: Callable[[str], None]
    now_ns: int = 0
    release_ns: int = 0
    job: int = 0
    last_latency_ns: Optional[int] = None
    state: dict = field(default_factory=dict)


class TaskBody:
    """Base class for component implementations; every hook is optional.

    ``init`` runs once before the first release and ``uninit`` once after
    the task drains its Terminate command. Both are driven by the container,
    never by management clients.
    """

    def init(self, ctx: TaskContext) -> None:
        pass

    def step(self, ctx: TaskContext) -> None:
        pass

    def uninit(self, ctx: TaskContext) -> None:
        pass


class IdleBody(TaskBody):
    """Stand-in for implementations that cannot be located."""


def load_body(bincode: str, implementations: Mapping[str, Callable[[], TaskBody]] = ()) -> TaskBody:
    """Instantiate the implementation named by *bincode*.

    Explicit *implementations* win; otherwise ``bincode`` is imported as a
    ``module.Class`` path. Unknown codes fall back to :class:`IdleBody`.
    """
    factory = dict(implementations).get(bincode)
    if factory is not None:
        return factory()
    module_name, _, attr = bincode.rpartition(".")
    if module_name:
        try:
            target = getattr(importlib.import_module(module_name), attr)
            body = target()
            if isinstance(body, TaskBody) or hasattr(body, "step"):
                return body
        except (ImportError, AttributeError, TypeError) as exc:
            logger.debug("cannot load %s: %s", bincode, exc)
    logger.info("no implementation for %s; running an idle body", bincode)
    return IdleBody()
