"""Latency statistics in the AVERAGE / AVEDEV / MIN / MAX layout."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

HEADER = ("AVERAGE", "AVEDEV", "MIN", "MAX")


@dataclass(frozen=True)
class LatencyStats:
    """Summary of scheduling latencies, in nanoseconds.

    ``avedev`` is the mean absolute deviation from the mean. With no samples
    every field except ``count`` is None.
    """

    average: Optional[float]
    avedev: Optional[float]
    min: Optional[int]
    max: Optional[int]
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0


def _latency(sample) -> int:
    return sample if isinstance(sample, int) else sample.latency_ns


def compute_stats(samples: Iterable) -> LatencyStats:
    """Summarize latency samples (``LatencySample`` objects or plain ints).

    The arithmetic is exact: with n samples summing to S, the mean is S/n and
    the mean absolute deviation is sum(|n*x - S|) / n**2, both evaluated as
    integer ratios and rounded once.
    """
    values = [_latency(s) for s in samples]
    n = len(values)
    if n == 0:
        return LatencyStats(None, None, None, None, 0)
    total = sum(values)
    spread = sum(abs(n * x - total) for x in values)
    return LatencyStats(
        average=float(Fraction(total, n)),
        avedev=float(Fraction(spread, n * n)),
        min=min(values),
        max=max(values),
        count=n,
    )


def _fmt(value, decimals: int) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, int):
        return str(value)
    return f"{value:.{decimals}f}"


def format_table(rows: Mapping[str, LatencyStats] | Sequence[tuple[str, LatencyStats]], *,
                 unit: str = "ns", decimals: int = 1) -> str:
    """Tab-separated table: a header row, then one labelled row per entry."""
    items = list(rows.items()) if isinstance(rows, Mapping) else list(rows)
    scale = {"ns": 1, "us": 1000}[unit]
    lines = ["\t" + "\t".join(HEADER)]
    for label, st in items:
        cells = [st.average, st.avedev, st.min, st.max]
        if scale != 1:
            cells = [None if c is None else c / scale for c in cells]
        lines.append(label + "\t" + "\t".join(_fmt(c, decimals) for c in cells))
    return "\n".join(lines) + "\n"
