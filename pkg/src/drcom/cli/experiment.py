"""
Calculation/display latency experiment.

A fast calculation task publishes its own scheduling latency through shared
memory while a slow display task prints it. Both run through the full
install/resolve/admit/start path. Stress mode adds busy-loop worker
processes that keep every core saturated for the duration of the run.
"""

from __future__ import annotations

import multiprocessing
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..bodies import calculation_descriptor, display_descriptor
from ..executive import Executive
from ..rtsim import LatencySample, VirtualContainer, WallClockContainer, cycle_jitter, write_latency_csv
from ..stats import LatencyStats, compute_stats, format_table

LOADS = ("light", "stress")


def _burn(deadline: float) -> None:
    x = 0
    while time.monotonic() < deadline:
        x = (x * 1103515245 + 12345) & 0x7FFFFFFF


@dataclass
class ExperimentResult:
    load: str
    mode: str
    stats: dict[str, LatencyStats] = field(default_factory=dict)
    samples: dict[str, list[LatencySample]] = field(default_factory=dict)
    elapsed_s: float = 0.0

    def table(self, unit: str = "ns") -> str:
        rows = [(f"{name} ({self.load})", st) for name, st in self.stats.items()]
        return format_table(rows, unit=unit)

    def write_csv(self, path) -> None:
        merged = [s for name in self.samples for s in self.samples[name]]
        write_latency_csv(merged, path)


def run_latency_experiment(
    calc_hz: float,
    display_hz: float,
    duration_s: float,
    load: str = "light",
    *,
    mode: str = "wall",
    workers: Optional[int] = None,
    jitter_ns: Optional[Sequence[int]] = None,
    output: Optional[Callable[[str], None]] = None,
    executive_kwargs: Optional[dict] = None,
) -> ExperimentResult:
    """Run the two-task configuration for *duration_s* and summarize latencies.

    Args:
        calc_hz / display_hz: task rates.
        load: ``"light"`` or ``"stress"``.
        mode: ``"wall"`` (real threads, host latencies) or ``"virtual"``.
        workers: number of stress processes; defaults to the core count.
        jitter_ns: release delays injected in virtual mode, cycled per job.
        output: sink for the display task's lines (silent by default).
    """
    if calc_hz <= 0 or display_hz <= 0 or duration_s <= 0:
        raise ValueError("rates and duration must be positive")
    if load not in LOADS:
        raise ValueError(f"load must be one of {LOADS}")
    if mode not in ("wall", "virtual"):
        raise ValueError("mode must be 'wall' or 'virtual'")

    sink = output or (lambda text: None)
    if mode == "wall":
        container = WallClockContainer(output=sink, record_trace=False)
    else:
        jitter = cycle_jitter(jitter_ns) if jitter_ns else None
        container = VirtualContainer(output=sink, jitter=jitter, record_trace=False)
    executive = Executive(container=container, **(executive_kwargs or {}))

    calc = executive.install(calculation_descriptor(calc_hz))
    disp = executive.install(display_descriptor(display_hz))

    burners = []
    if load == "stress" and mode == "wall":
        n = workers if workers is not None else (os.cpu_count() or 1)
        deadline = time.monotonic() + duration_s + 1.0
        for _ in range(n):
            proc = multiprocessing.Process(target=_burn, args=(deadline,), daemon=True)
            proc.start()
            burners.append(proc)

    began = time.monotonic()
    try:
        executive.start(calc)
        executive.start(disp)
        container.run_for(int(duration_s * 1e9))
        executive.stop(calc)  # cascades to the display
    finally:
        container.shutdown()
        for proc in burners:
            proc.terminate()
            proc.join(1.0)
    elapsed = time.monotonic() - began

    result = ExperimentResult(load=load, mode=mode, elapsed_s=elapsed)
    for name, handle in (("calculation", calc), ("display", disp)):
        samples = container.collect_latency(handle)
        result.samples[name] = samples
        result.stats[name] = compute_stats(samples)
    return result
