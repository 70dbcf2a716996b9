"""
Deterministic virtual-time backend.

A single-threaded discrete-event loop advances a logical nanosecond clock.
Each CPU runs one step at a time, without preemption; when a CPU frees up,
the ready job with the smallest ``(priority, release, task id)`` goes next,
so equal priorities are served in release order (round robin for equal
periods). Step cost and release jitter are injectable, which is how tests
produce contention and known latencies.
"""

from __future__ import annotations

from typing import Callable, Optional

from .container import Container, _Task
from .task import TaskControlBlock

CostFn = Callable[[TaskControlBlock], int]
JitterFn = Callable[[TaskControlBlock, int], int]


def cycle_jitter(values_ns) -> JitterFn:
    """Jitter function replaying *values_ns* for releases 0, 1, 2, ... (cyclically)."""
    values = list(values_ns)
    if not values:
        raise ValueError("need at least one jitter value")
    return lambda tcb, k: values[k % len(values)]


class VirtualContainer(Container):
    def __init__(self, *, step_cost: Optional[CostFn] = None, jitter: Optional[JitterFn] = None, **kwargs):
        super().__init__(**kwargs)
        self.step_cost = step_cost
        self.jitter = jitter
        self._now = 0
        self._cpu_free: dict[int, int] = {}

    @property
    def now(self) -> int:
        return self._now

    def _launch(self, task: _Task) -> None:
        task.t0 = self._now
        task.tcb.next_release = self._now
        task.body.init(task.ctx)

    def _on_post(self, task: _Task) -> None:
        if not task.tcb.periodic and task.poll_at is None:
            task.poll_at = self._now

    # ------------------------------------------------------------------ #

    def _jitter(self, task: _Task, k: int) -> int:
        if self.jitter is None:
            return 0
        if k not in task.jitter_cache:
            task.jitter_cache.clear()
            task.jitter_cache[k] = int(self.jitter(task.tcb, k))
        return task.jitter_cache[k]

    def _next(self, task: _Task):
        """``(start, kind, release)`` of the task's next wake-up, or None."""
        tcb = task.tcb
        if tcb.periodic:
            release = tcb.next_release
            if task.suspended:
                return release, "poll", release
            k = (release - task.t0) // tcb.period_ns
            ready = release + self._jitter(task, k)
            return max(ready, self._cpu_free.get(tcb.cpu, 0)), "step", release
        if task.poll_at is not None:
            return task.poll_at, "poll", task.poll_at
        if task.suspended or tcb.trigger_port is None:
            return None
        arrival = task.ctx.ports[tcb.trigger_port].channel.head_arrival()
        if arrival is None:
            return None
        return max(arrival, self._cpu_free.get(tcb.cpu, 0)), "step", arrival

    def run_until(self, t_end: int) -> int:
        """Process every wake-up starting before *t_end*; returns steps executed."""
        executed = 0
        while True:
            best = None
            for task in self.live_tasks():
                wake = self._next(task)
                if wake is None:
                    continue
                start, kind, release = wake
                key = (start, task.tcb.priority, release, task.tcb.component_id)
                if best is None or key < best[0]:
                    best = (key, task, kind, release)
            if best is None or best[0][0] >= t_end:
                break
            (start, *_), task, kind, release = best
            self._now = max(self._now, start)
            if kind == "step":
                executed += self._step(task, start, release)
            else:
                self._poll(task, start)
        self._now = max(self._now, t_end)
        return executed

    def run_for(self, duration_ns: int) -> int:
        return self.run_until(self._now + int(duration_ns))

    def _step(self, task: _Task, start: int, release: int) -> int:
        tcb = task.tcb
        ok = self._run_step(task, release, start)
        cost = int(self.step_cost(tcb)) if self.step_cost else 0
        self._cpu_free[tcb.cpu] = start + cost
        if tcb.periodic:
            tcb.next_release = release + tcb.period_ns
        if ok and task.live:
            self._drain(task, start + cost)
        return 1 if ok else 0

    def _poll(self, task: _Task, t: int) -> None:
        tcb = task.tcb
        if tcb.periodic:
            # A task resumed here skips this grid point and steps at the next one.
            tcb.next_release += tcb.period_ns
        else:
            task.poll_at = None
        self._drain(task, t)
