"""
Wall-clock backend: one OS thread per task, released from a monotonic clock.

Release times are computed as ``t0 + k * period`` so lateness never
accumulates into drift. There is no real-time scheduling underneath, so the
measured latencies describe the host (interpreter, GIL, OS scheduler), not a
hard real-time guarantee.
"""

from __future__ import annotations

import threading
import time

from .container import Container, _Task
from .task import TaskStatus

# Sleep until this close to the deadline, then spin.
_SPIN_NS = 200_000
_START_SLACK_NS = 2_000_000


def sleep_until(deadline_ns: int) -> None:
    while True:
        remaining = deadline_ns - time.monotonic_ns()
        if remaining <= 0:
            return
        if remaining > _SPIN_NS:
            time.sleep((remaining - _SPIN_NS) / 1e9)


class WallClockContainer(Container):
    def __init__(self, *, poll_interval: float = 0.001, **kwargs):
        super().__init__(**kwargs)
        self.poll_interval = poll_interval

    @property
    def now(self) -> int:
        return time.monotonic_ns()

    def _launch(self, task: _Task) -> None:
        task.t0 = self.now + _START_SLACK_NS
        task.tcb.next_release = task.t0
        target = self._run_periodic if task.tcb.periodic else self._run_aperiodic
        task.thread = threading.Thread(
            target=target, args=(task,), name=f"rt-{task.tcb.name}", daemon=True
        )
        task.thread.start()

    def _run_periodic(self, task: _Task) -> None:
        tcb = task.tcb
        task.body.init(task.ctx)
        while task.live:
            release = tcb.next_release
            sleep_until(release)
            if not task.suspended:
                actual = time.monotonic_ns()
                if not self._run_step(task, release, actual):
                    return
            tcb.next_release = release + tcb.period_ns
            self._drain(task, time.monotonic_ns())

    def _run_aperiodic(self, task: _Task) -> None:
        tcb = task.tcb
        task.body.init(task.ctx)
        inbox = task.ctx.ports[tcb.trigger_port].channel if tcb.trigger_port else None
        while task.live:
            if inbox is not None and not task.suspended and inbox.wait(self.poll_interval):
                arrival = inbox.head_arrival() or self.now
                if not self._run_step(task, arrival, self.now):
                    return
            elif inbox is None or task.suspended:
                task.cmd.wakeup.wait(self.poll_interval)
            self._drain(task, self.now)

    def run_for(self, duration_ns: int) -> None:
        time.sleep(duration_ns / 1e9)

    def shutdown(self, timeout: float = 1.0) -> None:
        super().shutdown(timeout)
        deadline = time.monotonic() + timeout
        for task in list(self._tasks.values()) + list(self._retired):
            thread = task.thread
            if thread is not None and thread.is_alive():
                thread.join(max(0.0, deadline - time.monotonic()))

    def join(self, handle: int, timeout: float = 1.0) -> bool:
        """Wait for the task of *handle* to finish; True if it did."""
        task = self._tasks.get(handle)
        if task is None or task.thread is None:
            return True
        task.thread.join(timeout)
        return task.tcb.status is TaskStatus.TERMINATED
