"""
Execution plane shared by the virtual-time and wall-clock backends.

The executive hands an admitted component to :meth:`Container.activate`,
which builds the component's port views from its bindings, creates its
command mailbox and spawns the periodic task. Backends only decide *when*
steps happen; channel wiring, command semantics, latency bookkeeping and the
dispatch trace live here.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
from concurrent.futures import Future
from typing import Callable, Iterable, Mapping, Optional

from ..descriptor import ComponentDescriptor, Interface, TaskType
from .channels import (
    DEFAULT_MAILBOX_CAPACITY,
    CommandMailbox,
    MailboxChannel,
    MailboxInPort,
    MailboxOutPort,
    QueryStatus,
    Resume,
    SetProperty,
    SharedMemoryChannel,
    ShmInPort,
    ShmOutPort,
    Suspend,
    Terminate,
)
from .task import LatencySample, TaskBody, TaskContext, TaskControlBlock, TaskStatus

logger = logging.getLogger(__name__)


class SpawnFailure(RuntimeError):
    code = "SpawnFailure"


class UnknownTask(KeyError):
    code = "UnknownTask"

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown task"


class _Task:
    __slots__ = (
        "tcb", "body", "ctx", "cmd", "writers", "suspended", "steps",
        "t0", "poll_at", "jitter_cache", "thread", "mailboxes",
    )

    def __init__(self, tcb: TaskControlBlock, body: TaskBody, ctx: TaskContext, cmd: CommandMailbox):
        self.tcb = tcb
        self.body = body
        self.ctx = ctx
        self.cmd = cmd
        self.writers: list = []
        self.mailboxes: list = []  # (sender, mailbox) pairs this task consumes from
        self.suspended = False
        self.steps = 0
        self.t0 = 0
        self.poll_at: Optional[int] = None
        self.jitter_cache: dict[int, int] = {}
        self.thread: Optional[threading.Thread] = None

    @property
    def live(self) -> bool:
        return self.tcb.status is not TaskStatus.TERMINATED


class Container:
    """Base class for rtsim backends.

    Args:
        output: sink for text emitted by task bodies (defaults to logging).
        record_trace: keep a dispatch trace of spawns, steps, posts and drains.
        mailbox_capacity: capacity of consumer mailboxes.
        on_fault: called as ``on_fault(handle, exc)`` when a body raises.
    """

    def __init__(
        self,
        *,
        output: Optional[Callable[[str], None]] = None,
        record_trace: bool = True,
        mailbox_capacity: int = DEFAULT_MAILBOX_CAPACITY,
        on_fault: Optional[Callable[[int, BaseException], None]] = None,
    ):
        self.output = output or (lambda text: logger.info("%s", text))
        self.record_trace = record_trace
        self.mailbox_capacity = mailbox_capacity
        self.on_fault = on_fault
        self.trace: list[dict] = []
        self._tasks: dict[int, _Task] = {}
        self._retired: list[_Task] = []
        self._samples: dict[int, list[LatencySample]] = {}
        self._last_sample: dict[int, LatencySample] = {}
        self._shm: dict[tuple[int, str], SharedMemoryChannel] = {}
        self._senders: dict[tuple[int, str], MailboxOutPort] = {}
        self._lock = threading.RLock()

    # ------------------------------------------------------------------ #
    # Clock; provided by backends
    # ------------------------------------------------------------------ #

    @property
    def now(self) -> int:
        raise NotImplementedError

    def _launch(self, task: _Task) -> None:
        raise NotImplementedError

    def _on_post(self, task: _Task) -> None:
        pass

    # ------------------------------------------------------------------ #
    # Wiring
    # ------------------------------------------------------------------ #

    def activate(
        self,
        handle: int,
        descriptor: ComponentDescriptor,
        bindings: Iterable,
        properties: Mapping[str, str],
        body: TaskBody,
    ) -> TaskControlBlock:
        """Create the component's channels and port views, then spawn it."""
        bindings = {b.consumer_port: b for b in bindings}
        ports: dict = {}
        writers = []
        mailboxes = []
        with self._lock:
            for out in descriptor.outports:
                key = (handle, out.name)
                if out.interface is Interface.SHARED_MEMORY:
                    channel = SharedMemoryChannel(f"{descriptor.name}.{out.name}", out.data_type, out.size)
                    self._shm[key] = channel
                    ports[out.name] = ShmOutPort(channel)
                else:
                    ports[out.name] = MailboxOutPort(f"{descriptor.name}.{out.name}", out.data_type, out.size)
                    self._senders[key] = ports[out.name]
                writers.append(ports[out.name])
            for inp in descriptor.inports:
                binding = bindings.get(inp.name)
                if binding is None:
                    raise SpawnFailure(f"{descriptor.name}: inport {inp.name!r} is not bound")
                source = (binding.provider, binding.provider_port)
                if inp.interface is Interface.SHARED_MEMORY:
                    if source not in self._shm:
                        raise SpawnFailure(f"{descriptor.name}: no channel for {source}")
                    ports[inp.name] = ShmInPort(self._shm[source])
                else:
                    if source not in self._senders:
                        raise SpawnFailure(f"{descriptor.name}: no channel for {source}")
                    mailbox = MailboxChannel(
                        f"{descriptor.name}.{inp.name}", inp.data_type, inp.size,
                        capacity=self.mailbox_capacity, clock=lambda: self.now,
                    )
                    self._senders[source].targets.append(mailbox)
                    mailboxes.append((self._senders[source], mailbox))
                    ports[inp.name] = MailboxInPort(mailbox)

        task_spec = descriptor.task
        trigger = None
        if descriptor.task_type is TaskType.APERIODIC:
            trigger = next((p.name for p in descriptor.inports if p.interface is Interface.MAILBOX), None)
        tcb = TaskControlBlock(
            component_id=handle,
            period_ns=task_spec.period_ns if task_spec else None,
            priority=descriptor.priority,
            cpu=descriptor.cpu,
            name=descriptor.name,
            trigger_port=trigger,
        )
        task = self.spawn_task(tcb, body, CommandMailbox(), ports=ports, properties=properties)
        task.writers = writers
        task.mailboxes = mailboxes
        return tcb

    def spawn_task(
        self,
        tcb: TaskControlBlock,
        body: TaskBody,
        cmd: CommandMailbox,
        *,
        ports: Optional[dict] = None,
        properties: Optional[Mapping[str, str]] = None,
    ) -> _Task:
        """Start a worker for *tcb*; ``body.init`` runs before the first release."""
        with self._lock:
            current = self._tasks.get(tcb.component_id)
            if current is not None and current.live:
                if current.tcb.status is not TaskStatus.TERMINATING:
                    raise SpawnFailure(f"task {tcb.component_id} is already running")
                self._retired.append(current)
            ctx = TaskContext(
                component_id=tcb.component_id,
                name=tcb.name,
                ports=dict(ports or {}),
                properties=dict(properties or {}),
                period_ns=tcb.period_ns,
                emit=self.output,
            )
            task = _Task(tcb, body, ctx, cmd)
            self._tasks[tcb.component_id] = task
            self._samples.setdefault(tcb.component_id, [])
        try:
            self._launch(task)
        except Exception as exc:
            with self._lock:
                self._tasks.pop(tcb.component_id, None)
            raise SpawnFailure(str(exc)) from exc
        self._trace("spawn", task, self.now)
        return task

    def deactivate(self, handle: int) -> None:
        """Ask the task to terminate at its next boundary and unpublish its outports."""
        with self._lock:
            task = self._task(handle)
            for key in [k for k in self._shm if k[0] == handle]:
                del self._shm[key]
            for key in [k for k in self._senders if k[0] == handle]:
                del self._senders[key]
            for sender, mailbox in task.mailboxes:
                if mailbox in sender.targets:
                    sender.targets.remove(mailbox)
        if task.tcb.status is not TaskStatus.TERMINATING:
            self.post_command(handle, Terminate())

    def rebind(self, binding) -> None:
        """Point a live consumer's inport at a different provider."""
        with self._lock:
            task = self._task(binding.consumer)
            view = task.ctx.ports[binding.consumer_port]
            source = (binding.provider, binding.provider_port)
            if isinstance(view, ShmInPort):
                view.channel = self._shm[source]
            else:
                for sender, mailbox in task.mailboxes:
                    if mailbox is view.channel and mailbox in sender.targets:
                        sender.targets.remove(mailbox)
                task.mailboxes = [(s, m) for s, m in task.mailboxes if m is not view.channel]
                self._senders[source].targets.append(view.channel)
                task.mailboxes.append((self._senders[source], view.channel))

    # ------------------------------------------------------------------ #
    # Management
    # ------------------------------------------------------------------ #

    def _task(self, handle: int) -> _Task:
        task = self._tasks.get(handle)
        if task is None or not task.live:
            raise UnknownTask(f"no live task for component {handle}")
        return task

    def task(self, handle: int) -> TaskControlBlock:
        task = self._tasks.get(handle)
        if task is None:
            raise UnknownTask(f"no task for component {handle}")
        return task.tcb

    def has_task(self, handle: int) -> bool:
        task = self._tasks.get(handle)
        return task is not None and task.live

    def steps(self, handle: int) -> int:
        task = self._tasks.get(handle)
        if task is None:
            raise UnknownTask(f"no task for component {handle}")
        return task.steps

    def context(self, handle: int) -> TaskContext:
        return self._task(handle).ctx

    def post_command(self, handle: int, cmd) -> None:
        """Queue *cmd* for the task; it takes effect at the next boundary."""
        with self._lock:
            task = self._task(handle)
            task.cmd.post(cmd)
            if isinstance(cmd, Terminate):
                task.tcb.status = TaskStatus.TERMINATING
        self._trace("post", task, self.now, command=type(cmd).__name__)
        self._on_post(task)

    def query_status(self, handle: int) -> Future:
        reply: Future = Future()
        self.post_command(handle, QueryStatus(reply))
        return reply

    def collect_latency(self, handle: int) -> list[LatencySample]:
        """Samples recorded since the previous collection, oldest first."""
        with self._lock:
            if handle not in self._samples:
                raise UnknownTask(f"no task for component {handle}")
            samples = self._samples[handle]
            self._samples[handle] = []
        return sorted(samples, key=lambda s: s.release_expected)

    def live_tasks(self) -> list[_Task]:
        with self._lock:
            tasks = [t for t in self._tasks.values() if t.live] + [t for t in self._retired if t.live]
        return sorted(tasks, key=lambda t: (t.tcb.component_id, id(t)))

    # ------------------------------------------------------------------ #
    # Hooks used by backends
    # ------------------------------------------------------------------ #

    def _record_sample(self, task: _Task, release: int, actual: int) -> None:
        sample = LatencySample(task.tcb.component_id, release, actual)
        with self._lock:
            self._samples.setdefault(task.tcb.component_id, []).append(sample)
            self._last_sample[task.tcb.component_id] = sample
        task.ctx.last_latency_ns = sample.latency_ns

    def _run_step(self, task: _Task, release: int, actual: int) -> bool:
        """Run one step of *task*; returns False if the body faulted."""
        ctx = task.ctx
        ctx.now_ns = actual
        ctx.release_ns = release
        if task.tcb.periodic:
            self._record_sample(task, release, actual)
        self._trace("step", task, actual, release=release)
        try:
            task.body.step(ctx)
        except Exception as exc:
            logger.warning("task %s faulted: %s", task.tcb.name, exc)
            self._trace("fault", task, actual, detail=f"{type(exc).__name__}: {exc}")
            self._finish(task)
            if self.on_fault is not None:
                self.on_fault(task.tcb.component_id, exc)
            return False
        task.steps += 1
        ctx.job += 1
        return True

    def _drain(self, task: _Task, now: int) -> None:
        """Apply every queued command; called at each period boundary."""
        terminate = False
        for cmd in task.cmd.drain():
            self._trace("drain", task, now, command=type(cmd).__name__)
            if isinstance(cmd, Suspend):
                task.suspended = True
                if task.tcb.status is TaskStatus.RUNNING:
                    task.tcb.status = TaskStatus.SUSPENDED
            elif isinstance(cmd, Resume):
                task.suspended = False
                if task.tcb.status is TaskStatus.SUSPENDED:
                    task.tcb.status = TaskStatus.RUNNING
            elif isinstance(cmd, SetProperty):
                task.ctx.properties[cmd.name] = cmd.value
            elif isinstance(cmd, QueryStatus):
                status = TaskStatus.TERMINATED if terminate else task.tcb.status
                if not cmd.reply.done():
                    cmd.reply.set_result(self._status(task, status))
            elif isinstance(cmd, Terminate):
                terminate = True
        if terminate:
            self._finish(task)

    def _status(self, task: _Task, status: TaskStatus) -> dict:
        return {
            "task": task.tcb.component_id,
            "name": task.tcb.name,
            "status": status.value,
            "properties": dict(task.ctx.properties),
            "steps": task.steps,
            "last_latency": self._last_sample.get(task.tcb.component_id),
        }

    def _finish(self, task: _Task) -> None:
        for writer in task.writers:
            writer.closed = True
        task.tcb.status = TaskStatus.TERMINATED
        try:
            task.body.uninit(task.ctx)
        except Exception as exc:
            logger.warning("uninit of %s failed: %s", task.tcb.name, exc)
        self._trace("terminate", task, self.now)
        for cmd in task.cmd.drain():
            if isinstance(cmd, QueryStatus) and not cmd.reply.done():
                cmd.reply.set_result(self._status(task, TaskStatus.TERMINATED))
        with self._lock:
            if task in self._retired:
                self._retired.remove(task)

    def _trace(self, kind: str, task: _Task, t: int, **extra) -> None:
        if not self.record_trace:
            return
        record = {
            "t": t,
            "event": kind,
            "task": task.tcb.component_id,
            "name": task.tcb.name,
            "cpu": task.tcb.cpu,
            "priority": task.tcb.priority,
        }
        record.update(extra)
        self.trace.append(record)

    # ------------------------------------------------------------------ #
    # Export
    # ------------------------------------------------------------------ #

    def export_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.trace:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def shutdown(self, timeout: float = 1.0) -> None:
        for task in self.live_tasks():
            if task.tcb.status is not TaskStatus.TERMINATING:
                try:
                    self.post_command(task.tcb.component_id, Terminate())
                except Exception:
                    pass


def write_latency_csv(samples: Iterable[LatencySample], path_or_file) -> None:
    """Write samples as ``task,release_expected_ns,release_actual_ns,latency_ns``."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(fh)
        writer.writerow(["task", "release_expected_ns", "release_actual_ns", "latency_ns"])
        for s in samples:
            writer.writerow([s.task, s.release_expected, s.release_actual, s.latency_ns])
    finally:
        if own:
            fh.close()
