"""
Task bodies for the calculation/display experiment.

``Calculation`` runs a small synthetic workload every period and publishes
its own scheduling latency on the ``latdat`` shared-memory outport as
``[job, latency_ns, min_ns, max_ns]``. ``Display`` reads that port at a much
lower rate and prints what it finds.
"""

from __future__ import annotations

from .descriptor import (
    ComponentDescriptor,
    DataType,
    Direction,
    Interface,
    PeriodicTaskSpec,
    PortSpec,
    PropertySpec,
    TaskType,
    ValueType,
)
from .rtsim.task import TaskBody, TaskContext

LATDAT = "latdat"
_I32 = (-(2**31), 2**31 - 1)


def _clamp(x: int) -> int:
    return max(_I32[0], min(_I32[1], x))


def latdat_port(direction: Direction) -> PortSpec:
    return PortSpec(LATDAT, direction, Interface.SHARED_MEMORY, DataType.INTEGER, 4)


class Calculation(TaskBody):
    def init(self, ctx: TaskContext) -> None:
        ctx.state["min"] = None
        ctx.state["max"] = None

    def step(self, ctx: TaskContext) -> None:
        work = int(ctx.properties.get("work", "200"))
        acc = 0
        for i in range(work):
            acc += i * i
        latency = ctx.last_latency_ns or 0
        lo, hi = ctx.state["min"], ctx.state["max"]
        ctx.state["min"] = latency if lo is None else min(lo, latency)
        ctx.state["max"] = latency if hi is None else max(hi, latency)
        port = ctx.ports.get(LATDAT)
        if port is not None:
            port.write([_clamp(ctx.job), _clamp(latency), _clamp(ctx.state["min"]), _clamp(ctx.state["max"])])


class Display(TaskBody):
    def step(self, ctx: TaskContext) -> None:
        snapshot = ctx.ports[LATDAT].read()
        if snapshot is None:
            ctx.emit(f"{ctx.name}: no data yet")
            return
        (job, latency, lo, hi), version = snapshot
        ctx.state["last_version"] = version
        ctx.emit(f"{ctx.name}: job {job} latency {latency} ns (min {lo}, max {hi})")


def calculation_descriptor(hz: float = 1000.0, *, name: str = "calc", cpu_usage: float = 0.3,
                           priority: int = 1, cpu: int = 0) -> ComponentDescriptor:
    return ComponentDescriptor(
        name=name,
        desc="simulated computing job publishing its scheduling latency",
        task_type=TaskType.PERIODIC,
        bincode="drcom.bodies.Calculation",
        cpu_usage=cpu_usage,
        task=PeriodicTaskSpec(hz, cpu, priority),
        outports=(latdat_port(Direction.OUT),),
        properties=(PropertySpec("work", ValueType.INTEGER, "200"),),
    )


def display_descriptor(hz: float = 4.0, *, name: str = "disp", cpu_usage: float = 0.05,
                       priority: int = 2, cpu: int = 0) -> ComponentDescriptor:
    return ComponentDescriptor(
        name=name,
        desc="prints the latency published by the calculation task",
        task_type=TaskType.PERIODIC,
        bincode="drcom.bodies.Display",
        cpu_usage=cpu_usage,
        task=PeriodicTaskSpec(hz, cpu, priority),
        inports=(latdat_port(Direction.IN),),
    )
