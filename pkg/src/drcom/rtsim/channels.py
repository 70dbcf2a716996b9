"""
Data-path channels between tasks, and the per-task command mailbox.

Shared memory is a single slot with last-value semantics: one writer
replaces the whole buffer, readers see the freshest complete write. The slot
holds an immutable ``(data, version)`` tuple that is replaced by a single
reference assignment, so a reader can never observe half of a write.

Mailboxes are bounded FIFOs of fixed-size messages. A send on a full
mailbox is rejected with :class:`MailboxOverflow` and leaves the queue as it
was.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from ..descriptor import DataType

DEFAULT_MAILBOX_CAPACITY = 16
DEFAULT_COMMAND_CAPACITY = 64


class SizeMismatch(ValueError):
    code = "SizeMismatch"


class ChannelClosed(RuntimeError):
    code = "ChannelClosed"


class MailboxOverflow(Exception):
    code = "Overflow"


class CommandQueueFull(Exception):
    code = "CommandQueueFull"


def _check_payload(data: Sequence[int], data_type: DataType, size: int) -> tuple[int, ...]:
    if len(data) != size:
        raise SizeMismatch(f"expected {size} elements, got {len(data)}")
    lo, hi = data_type.bounds
    payload = tuple(int(x) for x in data)
    for x in payload:
        if not lo <= x <= hi:
            raise ValueError(f"{x} does not fit in {data_type.value}")
    return payload


class SharedMemoryChannel:
    def __init__(self, name: str, data_type: DataType, size: int):
        self.name = name
        self.data_type = data_type
        self.size = size
        self._slot: Optional[tuple[tuple[int, ...], int]] = None
        self._write_lock = threading.Lock()

    @property
    def version(self) -> int:
        slot = self._slot
        return 0 if slot is None else slot[1]

    def write(self, data: Sequence[int]) -> int:
        """Replace the slot with *data*; returns the new version."""
        payload = _check_payload(data, self.data_type, self.size)
        with self._write_lock:
            version = self.version + 1
            self._slot = (payload, version)
        return version

    def read(self) -> Optional[tuple[tuple[int, ...], int]]:
        """Current ``(data, version)``, or None before the first write."""
        return self._slot

    def __repr__(self) -> str:
        return f"SharedMemoryChannel({self.name!r}, {self.data_type.value}, size={self.size}, version={self.version})"


class MailboxChannel:
    def __init__(
        self,
        name: str,
        data_type: DataType,
        size: int,
        capacity: int = DEFAULT_MAILBOX_CAPACITY,
        clock: Optional[Callable[[], int]] = None,
    ):
        if capacity < 1:
            raise ValueError("mailbox capacity must be >= 1")
        self.name = name
        self.data_type = data_type
        self.size = size
        self.capacity = capacity
        self._clock = clock
        self._queue: deque[tuple[tuple[int, ...], int]] = deque()
        self._cond = threading.Condition()

    def __len__(self) -> int:
        return len(self._queue)

    def send(self, msg: Sequence[int]) -> None:
        payload = _check_payload(msg, self.data_type, self.size)
        with self._cond:
            if len(self._queue) >= self.capacity:
                raise MailboxOverflow(f"mailbox {self.name!r} is full ({self.capacity} messages)")
            stamp = self._clock() if self._clock is not None else 0
            self._queue.append((payload, stamp))
            self._cond.notify_all()

    def recv(self) -> Optional[tuple[int, ...]]:
        """Pop the oldest message, or return None if the mailbox is empty."""
        with self._cond:
            if not self._queue:
                return None
            return self._queue.popleft()[0]

    def head_arrival(self) -> Optional[int]:
        with self._cond:
            return self._queue[0][1] if self._queue else None

    def wait(self, timeout: float) -> bool:
        with self._cond:
            if not self._queue:
                self._cond.wait(timeout)
            return bool(self._queue)


# --------------------------------------------------------------------------- #
# Management commands
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Suspend:
    pass


@dataclass(frozen=True)
class Resume:
    pass


@dataclass(frozen=True)
class SetProperty:
    name: str
    value: str


@dataclass(frozen=True)
class QueryStatus:
    reply: Any = field(compare=False)  # concurrent.futures.Future


@dataclass(frozen=True)
class Terminate:
    pass


class CommandMailbox:
    """Multi-producer, single-consumer queue drained at period boundaries."""

    def __init__(self, capacity: int = DEFAULT_COMMAND_CAPACITY):
        self.capacity = capacity
        self._queue: deque = deque()
        self._lock = threading.Lock()
        self.wakeup = threading.Event()

    def __len__(self) -> int:
        return len(self._queue)

    def post(self, cmd) -> None:
        with self._lock:
            if len(self._queue) >= self.capacity:
                raise CommandQueueFull(f"command queue full ({self.capacity})")
            self._queue.append(cmd)
        self.wakeup.set()

    def drain(self) -> list:
        """Take every queued command without blocking."""
        with self._lock:
            cmds = list(self._queue)
            self._queue.clear()
            self.wakeup.clear()
        return cmds


# --------------------------------------------------------------------------- #
# Port views handed to task bodies
# --------------------------------------------------------------------------- #


class ShmOutPort:
    def __init__(self, channel: SharedMemoryChannel):
        self.channel = channel
        self.closed = False

    def write(self, data: Sequence[int]) -> int:
        if self.closed:
            raise ChannelClosed(f"writer of {self.channel.name!r} has been terminated")
        return self.channel.write(data)


class ShmInPort:
    def __init__(self, channel: SharedMemoryChannel):
        self.channel = channel

    def read(self):
        return self.channel.read()


class MailboxOutPort:
    """Sender side of a mailbox port; fans out to every bound consumer."""

    def __init__(self, name: str, data_type: DataType, size: int):
        self.name = name
        self.data_type = data_type
        self.size = size
        self.targets: list[MailboxChannel] = []
        self.closed = False

    def send(self, msg: Sequence[int]) -> int:
        """Deliver to all targets; returns how many accepted the message.

        Raises MailboxOverflow if any target rejected it (the others still
        received it).
        """
        if self.closed:
            raise ChannelClosed(f"sender of {self.name!r} has been terminated")
        _check_payload(msg, self.data_type, self.size)
        delivered = 0
        overflowed = []
        for target in list(self.targets):
            try:
                target.send(msg)
                delivered += 1
            except MailboxOverflow:
                overflowed.append(target.name)
        if overflowed:
            raise MailboxOverflow(f"{len(overflowed)} consumer mailbox(es) full")
        return delivered


class MailboxInPort:
    def __init__(self, channel: MailboxChannel):
        self.channel = channel

    def recv(self):
        return self.channel.recv()

    def __len__(self) -> int:
        return len(self.channel)
