import re
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drcom.descriptor import (
    ComponentDescriptor,
    DataType,
    DescriptorWarning,
    Direction,
    DuplicatePortName,
    Interface,
    InvalidValue,
    MalformedXml,
    MissingRequired,
    NameCheck,
    PeriodicTaskSpec,
    PortSpec,
    PropertySpec,
    TaskSpecMismatch,
    TaskType,
    UnknownContent,
    ValidationError,
    ValueType,
    parse_descriptor,
    serialize_descriptor,
    validate_name,
)

from conftest import FIGURE_XML, descriptors

CAMERA = ComponentDescriptor(
    name="camera",
    desc="this is a smart camera controller",
    task_type=TaskType.PERIODIC,
    enabled=True,
    cpu_usage=0.1,
    bincode="ua.pats.demo.smartcamera.RTComponent",
    task=PeriodicTaskSpec(100, 0, 2),
    outports=(PortSpec("images", Direction.OUT, Interface.SHARED_MEMORY, DataType.BYTE, 400),),
    inports=(PortSpec("xysize", Direction.IN, Interface.SHARED_MEMORY, DataType.INTEGER, 400),),
    properties=(PropertySpec("prox00", ValueType.INTEGER, "6"),),
)

MINIMAL_APERIODIC = '<component name="ev" type="aperiodic"><implementation bincode="a.B"/></component>'


def test_figure_sample_fields():
    d = parse_descriptor(FIGURE_XML)
    assert d.name == "camera"
    assert d.task_type is TaskType.PERIODIC
    assert d.enabled is True
    assert d.cpu_usage == 0.1
    assert d.bincode == "ua.pats.demo.smartcamera.RTComponent"
    assert (d.task.frequency, d.task.run_on_cpu, d.task.priority) == (100, 0, 2)
    assert d.outports == CAMERA.outports
    assert d.inports == CAMERA.inports
    assert d.properties == CAMERA.properties
    assert d == CAMERA


def test_figure_period_is_ten_ms():
    assert parse_descriptor(FIGURE_XML).task.period_ns == 10_000_000


def test_port_byte_length_is_count_times_itemsize():
    d = parse_descriptor(FIGURE_XML)
    assert d.port("images").nbytes == 400
    assert d.port("xysize").nbytes == 1600


def test_minimal_aperiodic_defaults():
    d = parse_descriptor(MINIMAL_APERIODIC)
    assert d.task_type is TaskType.APERIODIC
    assert d.task is None
    assert d.enabled is True
    assert d.cpu_usage == 0.0
    assert d.desc == ""
    assert d.inports == d.outports == d.properties == ()


def test_periodic_without_task_is_mismatch():
    xml = '<component name="p" type="periodic"><implementation bincode="a.B"/></component>'
    with pytest.raises(TaskSpecMismatch):
        parse_descriptor(xml)


def test_aperiodic_with_task_is_mismatch():
    xml = ('<component name="p" type="aperiodic"><implementation bincode="a.B"/>'
           '<periodictask frequency="10" runoncpu="0" priority="1"/></component>')
    with pytest.raises(TaskSpecMismatch):
        parse_descriptor(xml)


def test_both_cpu_spellings_accepted():
    a = FIGURE_XML
    b = FIGURE_XML.replace("runoncup", "runoncpu")
    assert parse_descriptor(a) == parse_descriptor(b)
    assert "runoncpu" in serialize_descriptor(parse_descriptor(a))
    assert "runoncup" not in serialize_descriptor(parse_descriptor(a))


def test_declared_namespace_and_plain_root_parse_alike():
    plain = FIGURE_XML.replace("<dr:component", "<component").replace("</dr:component>", "</component>")
    declared = FIGURE_XML.replace("<dr:component", '<dr:component xmlns:dr="http://example.org/x"')
    assert parse_descriptor(plain) == parse_descriptor(declared) == CAMERA


# ------------------------------------------------------------- round trips


def test_round_trip_figure():
    d = parse_descriptor(FIGURE_XML)
    assert parse_descriptor(serialize_descriptor(d)) == d


def test_round_trip_minimal_aperiodic():
    d = parse_descriptor(MINIMAL_APERIODIC)
    assert parse_descriptor(serialize_descriptor(d)) == d


def test_round_trip_keeps_property_order():
    props = tuple(PropertySpec(n, ValueType.STRING, n * 2) for n in ["z", "a", "m", "b"])
    d = ComponentDescriptor("o", TaskType.APERIODIC, "x.Y", properties=props)
    back = parse_descriptor(serialize_descriptor(d))
    assert [p.name for p in back.properties] == ["z", "a", "m", "b"]


@settings(max_examples=1000)
@given(descriptors())
def test_round_trip_generated(d):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DescriptorWarning)
        assert parse_descriptor(serialize_descriptor(d)) == d


@settings(max_examples=300)
@given(descriptors())
def test_parsed_task_presence_matches_type(d):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DescriptorWarning)
        back = parse_descriptor(serialize_descriptor(d))
    assert (back.task_type is TaskType.PERIODIC) == (back.task is not None)


# ---------------------------------------------------- rejection completeness


def _drop_attr(xml, element, attr):
    """Remove one attribute from the first <element ...> tag in *xml*."""
    m = re.search(r"<(?:dr:)?%s\b[^>]*>" % element, xml)
    assert m, element
    tag = m.group(0)
    stripped, n = re.subn(r'\s+%s="[^"]*"' % attr, "", tag, count=1)
    assert n == 1, (element, attr)
    return xml[: m.start()] + stripped + xml[m.end():]


REQUIRED = [
    ("component", "name", "name"),
    ("component", "type", "type"),
    ("implementation", "bincode", "implementation.bincode"),
    ("periodictask", "frequency", "periodictask.frequency"),
    ("periodictask", "runoncup", "periodictask.runoncpu"),
    ("periodictask", "priority", "periodictask.priority"),
    ("outport", "name", "outport.name"),
    ("outport", "interface", "outport.interface"),
    ("outport", "type", "outport.type"),
    ("outport", "size", "outport.size"),
    ("inport", "name", "inport.name"),
    ("inport", "interface", "inport.interface"),
    ("inport", "type", "inport.type"),
    ("inport", "size", "inport.size"),
    ("property", "name", "property.name"),
    ("property", "type", "property.type"),
    ("property", "value", "property.value"),
]


@pytest.mark.parametrize("element,attr,field", REQUIRED, ids=[f for _, _, f in REQUIRED])
def test_missing_required_names_field(element, attr, field):
    with pytest.raises(MissingRequired) as info:
        parse_descriptor(_drop_attr(FIGURE_XML, element, attr))
    assert info.value.field == field


def test_missing_implementation_element():
    xml = re.sub(r"<implementation[^>]*/>", "", FIGURE_XML)
    with pytest.raises(MissingRequired) as info:
        parse_descriptor(xml)
    assert info.value.field == "implementation"


@pytest.mark.parametrize("attr", ["desc", "enabled", "cpuusage"])
def test_optional_component_attributes(attr):
    d = parse_descriptor(_drop_attr(FIGURE_XML, "component", attr))
    assert d.name == "camera"


# -------------------------------------------------------------- bad values


@pytest.mark.parametrize(
    "old,new,field",
    [
        ('frequency="100"', 'frequency="fast"', "periodictask.frequency"),
        ('frequency="100"', 'frequency="0"', "periodictask.frequency"),
        ('priority="2"', 'priority="-1"', "periodictask.priority"),
        ('cpuusage="0.1"', 'cpuusage="1.5"', "cpuusage"),
        ('type="periodic"', 'type="sporadic"', "type"),
        ('interface="RTAI.SHM" type="Byte"', 'interface="RTAI.FIFO" type="Byte"', "outport.interface"),
        ('type="Integer"\nsize="400"', 'type="Long"\nsize="400"', "inport.type"),
        ('value="6"', 'value="six"', "property.value"),
        ('enabled="true"', 'enabled="yes"', "enabled"),
    ],
)
def test_invalid_values(old, new, field):
    assert old in FIGURE_XML
    with pytest.raises(InvalidValue) as info:
        parse_descriptor(FIGURE_XML.replace(old, new, 1))
    assert info.value.field == field


def test_zero_size_port_rejected():
    xml = FIGURE_XML.replace('size="400" />', 'size="0" />')
    with pytest.raises(InvalidValue):
        parse_descriptor(xml)


def test_duplicate_port_name():
    xml = FIGURE_XML.replace('name="xysize"', 'name="images"')
    with pytest.raises(DuplicatePortName) as info:
        parse_descriptor(xml)
    assert info.value.name == "images"


def test_malformed_xml():
    with pytest.raises(MalformedXml):
        parse_descriptor("<component name='x'")
    with pytest.raises(MalformedXml):
        parse_descriptor("<other/>")


def test_unknown_content_strict_and_lenient():
    xml = FIGURE_XML.replace('priority="2"/>', 'priority="2" deadline="5"/>')
    xml = xml.replace("  ...\n", "  <memory size='10'/>\n")
    with pytest.raises(UnknownContent):
        parse_descriptor(xml)
    with pytest.warns(DescriptorWarning) as caught:
        d = parse_descriptor(xml, strict=False)
    assert d == CAMERA
    messages = " ".join(str(w.message) for w in caught)
    assert "deadline" in messages and "memory" in messages


# --------------------------------------------------------------- name rule


def test_validate_name_examples():
    assert validate_name("camera", strict_six=True) is NameCheck.OK
    assert validate_name("calculation", strict_six=False) is NameCheck.WARNING
    with pytest.raises(ValidationError) as info:
        validate_name("", strict_six=False)
    assert info.value.reason == "EmptyName"
    with pytest.raises(ValidationError) as info:
        validate_name("calculation", strict_six=True)
    assert info.value.reason == "TooLong"


@given(st.text(min_size=1, max_size=12), st.booleans())
def test_validate_name_length_rule(name, strict):
    if len(name) <= 6:
        assert validate_name(name, strict) is NameCheck.OK
    elif strict:
        with pytest.raises(ValidationError):
            validate_name(name, strict)
    else:
        assert validate_name(name, strict) is NameCheck.WARNING


def test_long_name_warns_or_fails_in_parse():
    xml = FIGURE_XML.replace('name="camera"', 'name="cameracontrol"')
    with pytest.warns(DescriptorWarning):
        assert parse_descriptor(xml).name == "cameracontrol"
    with pytest.raises(ValidationError):
        parse_descriptor(xml, strict_six=True)
