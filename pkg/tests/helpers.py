"""Small descriptor builders shared by the test modules."""

import random

from drcom.descriptor import (
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


def port(name, direction, interface=Interface.SHARED_MEMORY, dtype=DataType.INTEGER, size=4):
    return PortSpec(name, direction, interface, dtype, size)


def comp(name, *, provides=(), needs=(), usage=0.0, cpu=0, hz=100.0, priority=1,
         enabled=True, props=(), interface=Interface.SHARED_MEMORY, bincode="drcom.rtsim.task.IdleBody"):
    """Periodic descriptor providing outports *provides* and consuming inports *needs*."""
    return ComponentDescriptor(
        name=name,
        task_type=TaskType.PERIODIC,
        bincode=bincode,
        enabled=enabled,
        cpu_usage=usage,
        task=PeriodicTaskSpec(hz, cpu, priority),
        inports=tuple(port(p, Direction.IN, interface) for p in needs),
        outports=tuple(port(p, Direction.OUT, interface) for p in provides),
        properties=tuple(PropertySpec(k, ValueType.STRING, v) for k, v in props),
    )


_ALPHA = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
_PRINTABLE = [chr(c) for c in range(0x20, 0x7F)] + list("\t\n\réßλ中😀&<>\"'")


def _ident(rng):
    return rng.choice(_ALPHA) + "".join(rng.choice(_ALPHA + "0123456789") for _ in range(rng.randint(0, 9)))


def _text(rng):
    return "".join(rng.choice(_PRINTABLE) for _ in range(rng.randint(0, 20)))


def random_descriptor(rng: random.Random) -> ComponentDescriptor:
    """Stdlib-random descriptor generator: cheap enough for timed bulk checks."""
    periodic = rng.random() < 0.5
    task = None
    if periodic:
        freq = float(rng.randint(1, 100_000)) if rng.random() < 0.5 else rng.uniform(0.01, 1e6)
        task = PeriodicTaskSpec(freq, rng.randint(0, 7), rng.randint(0, 99))
    names = list(dict.fromkeys(_ident(rng) for _ in range(rng.randint(0, 6))))
    split = rng.randint(0, len(names))

    def mk(n, direction):
        return PortSpec(n, direction, rng.choice(list(Interface)), rng.choice(list(DataType)), rng.randint(1, 10_000))

    props = []
    for _ in range(rng.randint(0, 5)):
        vt = rng.choice(list(ValueType))
        if vt is ValueType.INTEGER:
            value = str(rng.randint(-(10**12), 10**12))
        elif vt is ValueType.FLOAT:
            value = repr(rng.uniform(-1e12, 1e12))
        elif vt is ValueType.BOOLEAN:
            value = rng.choice(["true", "false"])
        else:
            value = _text(rng)
        props.append(PropertySpec(_ident(rng), vt, value))
    return ComponentDescriptor(
        name=_ident(rng),
        task_type=TaskType.PERIODIC if periodic else TaskType.APERIODIC,
        bincode=".".join(_ident(rng) for _ in range(rng.randint(1, 4))),
        desc=_text(rng),
        enabled=rng.random() < 0.5,
        cpu_usage=rng.random(),
        task=task,
        inports=tuple(mk(n, Direction.IN) for n in names[:split]),
        outports=tuple(mk(n, Direction.OUT) for n in names[split:]),
        properties=tuple(props),
    )


# ------------------------------------------------------- random event streams

from drcom.lifecycle import EventKind, LifecycleEvent  # noqa: E402

_KINDS = [
    EventKind.ENABLE, EventKind.DISABLE, EventKind.START, EventKind.START,
    EventKind.START, EventKind.START, EventKind.STOP, EventKind.UNINSTALL,
    EventKind.SUSPEND, EventKind.RESUME, EventKind.SET_PROPERTY,
    EventKind.PROVIDER_DEPARTED, EventKind.PROVIDER_APPEARED,
]


def random_pool(rng, n=20, cpus=3, names=5):
    """*n* descriptors with random claims, CPUs and port dependencies."""
    pool = [f"d{i}" for i in range(names)]
    out = []
    for i in range(n):
        provides = rng.sample(pool, rng.choice([0, 1, 1, 2]))
        needs = [p for p in rng.sample(pool, rng.choice([0, 0, 1, 1, 2])) if p not in provides]
        out.append(comp(
            f"k{i}",
            provides=provides,
            needs=needs,
            usage=rng.choice([0.0, rng.random(), rng.random() * 0.4, rng.random() * 0.2, round(rng.random(), 1)]),
            cpu=rng.randrange(cpus),
            enabled=rng.random() < 0.85,
            props=[("p", "0")],
        ))
    return out


def random_events(rng, pool, steps):
    """A stream of events over *pool*.

    Installs walk through the pool in order; other events target a random
    handle that was issued so far, so some of them fail (wrong state,
    uninstalled handle), which is part of what is being exercised.
    """
    events = []
    issued = 0
    for _ in range(steps):
        if issued < len(pool) and (issued == 0 or rng.random() < 0.3):
            events.append(LifecycleEvent(EventKind.INSTALL, pool[issued]))
            issued += 1
            continue
        kind = rng.choice(_KINDS)
        handle = rng.randint(1, issued)
        payload = None
        if kind is EventKind.SET_PROPERTY:
            payload = ("p", str(rng.randint(0, 9)))
        elif kind is EventKind.PROVIDER_DEPARTED:
            payload = "injected fault"
        events.append(LifecycleEvent(kind, handle, payload))
    return events


# ------------------------------------------------------- registry snapshots

from drcom.lifecycle import LifecycleState as S  # noqa: E402
from drcom.registry import InstanceView, RegistrySnapshot  # noqa: E402


def snap(*items):
    """items: (id, descriptor, state)"""
    return RegistrySnapshot(InstanceView(i, d, s, True, ()) for i, d, s in items)


def random_graph(rng, n, names=6, dag=True):
    pool = [f"p{i}" for i in range(names)]
    items = []
    for i in range(1, n + 1):
        provides = rng.sample(pool, rng.randint(0, 2))
        needs = [p for p in rng.sample(pool, rng.randint(0, 2)) if p not in provides]
        state = rng.choice([S.ACTIVE, S.ACTIVE, S.ACTIVE, S.SUSPENDED, S.SATISFIED, S.UNSATISFIED])
        items.append((i, comp(f"c{i}", provides=provides, needs=needs), state))
    if dag:
        # keep only needs that an earlier component provides
        fixed = []
        for i, d, s in items:
            earlier = {p.name for j, e, _ in items if j < i for p in e.outports}
            keep = [p.name for p in d.inports if p.name in earlier]
            fixed.append((i, comp(d.name, provides=[p.name for p in d.outports], needs=keep), s))
        items = fixed
    return snap(*items)
