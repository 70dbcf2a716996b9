import os

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

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

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIOS = os.path.join(os.path.dirname(HERE), "scenarios")

# The sample configuration exactly as printed, including its quirks: the
# spaced declaration, the undeclared dr: prefix, wrapped attribute values,
# the misspelled runoncup and the trailing ellipsis.
FIGURE_XML = """<? xml version="1.0" encoding="UTF-8"?>
<dr:component name="camera" desc="this is a smart camera
controller" type="periodic" enabled="true"
cpuusage="0.1">
  <implementation bincode="ua.pats.demo.
smartcamera.RTComponent"/>
  <periodictask frequency="100" runoncup="0" priority="2"/>
  <outport name="images" interface="RTAI.SHM" type="Byte"
size="400" />
  <inport name="xysize" interface="RTAI.SHM" type="Integer"
size="400"/>
  <property name="prox00" type="Integer" value="6" />
  ...
</dr:component>
"""


@pytest.fixture
def figure_xml():
    return FIGURE_XML


# ---------------------------------------------------------------- strategies

_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="\x00"),
    max_size=20,
)
_first = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
_ident = st.tuples(st.sampled_from(_first), st.text(_first + "0123456789", max_size=9)).map("".join)
_bincode = st.lists(_ident, min_size=1, max_size=4).map(".".join)
_port_shape = st.tuples(st.sampled_from(Interface), st.sampled_from(DataType), st.integers(1, 10_000))
_frequency = st.one_of(
    st.integers(1, 100_000).map(float),
    st.floats(0.01, 1e6, allow_nan=False, allow_infinity=False),
)
_values = {
    ValueType.INTEGER: st.integers(-(10**12), 10**12).map(str),
    ValueType.FLOAT: st.floats(allow_nan=False, allow_infinity=False).map(repr),
    ValueType.BOOLEAN: st.sampled_from(["true", "false"]),
    ValueType.STRING: _text,
}
_property = st.sampled_from(ValueType).flatmap(
    lambda vt: st.builds(PropertySpec, _ident, st.just(vt), _values[vt])
)
_task = st.builds(PeriodicTaskSpec, _frequency, st.integers(0, 7), st.integers(0, 99))


@st.composite
def descriptors(draw):
    task_type = draw(st.sampled_from(TaskType))
    task = draw(_task) if task_type is TaskType.PERIODIC else None
    names = draw(st.lists(_ident, unique=True, max_size=6))
    split = draw(st.integers(0, len(names)))
    shapes = [draw(_port_shape) for _ in names]
    inports = tuple(PortSpec(n, Direction.IN, *sh) for n, sh in zip(names[:split], shapes))
    outports = tuple(PortSpec(n, Direction.OUT, *sh) for n, sh in zip(names[split:], shapes[split:]))
    return ComponentDescriptor(
        name=draw(_ident),
        task_type=task_type,
        bincode=draw(_bincode),
        desc=draw(_text),
        enabled=draw(st.booleans()),
        cpu_usage=draw(st.floats(0.0, 1.0, allow_nan=False)),
        task=task,
        inports=inports,
        outports=outports,
        properties=tuple(draw(st.lists(_property, max_size=5))),
    )


# Criterion verdicts recorded by test_acceptance, echoed in the terminal summary.
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
