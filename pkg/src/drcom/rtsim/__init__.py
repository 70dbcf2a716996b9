"""Simulated real-time container: periodic tasks, data channels, command mailboxes."""

from .channels import (
    ChannelClosed,
    CommandMailbox,
    CommandQueueFull,
    MailboxChannel,
    MailboxOverflow,
    QueryStatus,
    Resume,
    SetProperty,
    SharedMemoryChannel,
    SizeMismatch,
    Suspend,
    Terminate,
)
from .container import Container, SpawnFailure, UnknownTask, write_latency_csv
from .task import IdleBody, LatencySample, TaskBody, TaskContext, TaskControlBlock, TaskStatus, load_body
from .virtual import VirtualContainer, cycle_jitter
from .wallclock import WallClockContainer

__all__ = [
    "ChannelClosed",
    "CommandMailbox",
    "CommandQueueFull",
    "Container",
    "IdleBody",
    "LatencySample",
    "MailboxChannel",
    "MailboxOverflow",
    "QueryStatus",
    "Resume",
    "SetProperty",
    "SharedMemoryChannel",
    "SizeMismatch",
    "SpawnFailure",
    "Suspend",
    "TaskBody",
    "TaskContext",
    "TaskControlBlock",
    "TaskStatus",
    "Terminate",
    "UnknownTask",
    "VirtualContainer",
    "WallClockContainer",
    "cycle_jitter",
    "load_body",
    "write_latency_csv",
]
