"""Dynamic reconfiguration executive for real-time component systems."""

from .descriptor import ComponentDescriptor, parse_descriptor, serialize_descriptor
from .executive import DispatchResult, EventLoop, Executive, replay
from .lifecycle import EventKind, LifecycleEvent, LifecycleState, StateChange
from .stats import LatencyStats, compute_stats, format_table

__version__ = "0.1.0"

__all__ = [
    "ComponentDescriptor",
    "DispatchResult",
    "EventKind",
    "EventLoop",
    "Executive",
    "LatencyStats",
    "LifecycleEvent",
    "LifecycleState",
    "StateChange",
    "compute_stats",
    "format_table",
    "parse_descriptor",
    "replay",
    "serialize_descriptor",
]
