"""
XML component descriptors.

A descriptor declares a component's real-time contract (task type, rate,
priority, CPU claim), its typed ports and its configuration properties::

    <dr:component name="camera" type="periodic" enabled="true" cpuusage="0.1">
      <implementation bincode="ua.pats.demo.smartcamera.RTComponent"/>
      <periodictask frequency="100" runoncpu="0" priority="2"/>
      <outport name="images" interface="RTAI.SHM" type="Byte" size="400"/>
      <inport name="xysize" interface="RTAI.SHM" type="Integer" size="400"/>
      <property name="prox00" type="Integer" value="6"/>
    </dr:component>

``parse_descriptor`` turns such text into a frozen :class:`ComponentDescriptor`
and ``serialize_descriptor`` goes the other way; the two round-trip exactly.
"""

from __future__ import annotations

import re
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
from xml.sax.saxutils import quoteattr

__all__ = [
    "TaskType",
    "Direction",
    "Interface",
    "DataType",
    "ValueType",
    "PortSpec",
    "PropertySpec",
    "PeriodicTaskSpec",
    "ComponentDescriptor",
    "ParseError",
    "MalformedXml",
    "MissingRequired",
    "InvalidValue",
    "DuplicatePortName",
    "TaskSpecMismatch",
    "UnknownContent",
    "ValidationError",
    "DescriptorWarning",
    "NameCheck",
    "validate_name",
    "parse_descriptor",
    "serialize_descriptor",
    "load_descriptor",
]

MAX_TASK_NAME = 6


class TaskType(Enum):
    PERIODIC = "periodic"
    APERIODIC = "aperiodic"


class Direction(Enum):
    IN = "in"
    OUT = "out"


class Interface(Enum):
    SHARED_MEMORY = "RTAI.SHM"
    MAILBOX = "RTAI.Mailbox"


class DataType(Enum):
    INTEGER = "Integer"
    BYTE = "Byte"

    @property
    def itemsize(self) -> int:
        return 4 if self is DataType.INTEGER else 1

    @property
    def bounds(self) -> tuple[int, int]:
        if self is DataType.INTEGER:
            return (-(2**31), 2**31 - 1)
        return (0, 255)


class ValueType(Enum):
    INTEGER = "Integer"
    STRING = "String"
    FLOAT = "Float"
    BOOLEAN = "Boolean"


# --------------------------------------------------------------------------- #
# Errors
# --------------------------------------------------------------------------- #


class ParseError(ValueError):
    """Base class for descriptor parse failures."""

    code = "ParseError"


class MalformedXml(ParseError):
    code = "MalformedXml"


class MissingRequired(ParseError):
    code = "MissingRequired"

    def __init__(self, field: str):
        super().__init__(f"missing required field {field!r}")
        self.field = field


class InvalidValue(ParseError):
    code = "InvalidValue"

    def __init__(self, field: str, text: str, why: str = ""):
        msg = f"invalid value {text!r} for {field!r}"
        super().__init__(f"{msg}: {why}" if why else msg)
        self.field = field
        self.text = text


class DuplicatePortName(ParseError):
    code = "DuplicatePortName"

    def __init__(self, name: str):
        super().__init__(f"port name {name!r} declared more than once")
        self.name = name


class TaskSpecMismatch(ParseError):
    code = "TaskSpecMismatch"


class UnknownContent(ParseError):
    """Unknown element or attribute in strict mode."""

    code = "UnknownContent"


class ValidationError(ValueError):
    code = "ValidationError"

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class DescriptorWarning(UserWarning):
    pass


# --------------------------------------------------------------------------- #
# Values
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class PortSpec:
    name: str
    direction: Direction
    interface: Interface
    data_type: DataType
    size: int

    def __post_init__(self):
        if not self.name:
            raise ValueError("port name must be non-empty")
        if self.size < 1:
            raise ValueError(f"port {self.name!r}: size must be >= 1")

    @property
    def nbytes(self) -> int:
        return self.size * self.data_type.itemsize


def _parse_typed(value_type: ValueType, text: str):
    if value_type is ValueType.INTEGER:
        return int(text.strip())
    if value_type is ValueType.FLOAT:
        return float(text.strip())
    if value_type is ValueType.BOOLEAN:
        lowered = text.strip().lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return lowered == "true"
    return text


@dataclass(frozen=True)
class PropertySpec:
    name: str
    value_type: ValueType
    value: str

    def __post_init__(self):
        _parse_typed(self.value_type, self.value)

    @property
    def typed_value(self):
        return _parse_typed(self.value_type, self.value)


@dataclass(frozen=True)
class PeriodicTaskSpec:
    frequency: float
    run_on_cpu: int = 0
    priority: int = 0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if self.period_ns <= 0:
            raise ValueError(f"frequency {self.frequency} Hz gives a zero period")
        if self.run_on_cpu < 0 or self.priority < 0:
            raise ValueError("run_on_cpu and priority must be non-negative")

    @property
    def period_ns(self) -> int:
        return round(1e9 / self.frequency)


@dataclass(frozen=True)
class ComponentDescriptor:
    name: str
    task_type: TaskType
    bincode: str
    desc: str = ""
    enabled: bool = True
    cpu_usage: float = 0.0
    task: Optional[PeriodicTaskSpec] = None
    inports: tuple[PortSpec, ...] = ()
    outports: tuple[PortSpec, ...] = ()
    properties: tuple[PropertySpec, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "inports", tuple(self.inports))
        object.__setattr__(self, "outports", tuple(self.outports))
        object.__setattr__(self, "properties", tuple(self.properties))
        if not self.name:
            raise ValueError("component name must be non-empty")
        if not 0.0 <= self.cpu_usage <= 1.0:
            raise ValueError(f"cpu_usage {self.cpu_usage} outside [0, 1]")
        if (self.task_type is TaskType.PERIODIC) != (self.task is not None):
            raise ValueError("periodic components need a task spec, aperiodic ones must not have one")
        seen = set()
        for port in self.inports + self.outports:
            if port.name in seen:
                raise ValueError(f"duplicate port name {port.name!r}")
            seen.add(port.name)
        for port in self.inports:
            if port.direction is not Direction.IN:
                raise ValueError(f"inport {port.name!r} has direction {port.direction}")
        for port in self.outports:
            if port.direction is not Direction.OUT:
                raise ValueError(f"outport {port.name!r} has direction {port.direction}")

    @property
    def cpu(self) -> int:
        """CPU index the claim is booked against (aperiodic tasks use CPU 0)."""
        return self.task.run_on_cpu if self.task is not None else 0

    @property
    def priority(self) -> int:
        return self.task.priority if self.task is not None else APERIODIC_PRIORITY

    def port(self, name: str) -> PortSpec:
        for p in self.inports + self.outports:
            if p.name == name:
                return p
        raise KeyError(name)


# Aperiodic tasks run behind every periodic one.
APERIODIC_PRIORITY = 2**31 - 1


class NameCheck(Enum):
    OK = "ok"
    WARNING = "warning"


def validate_name(name: str, strict_six: bool = False) -> NameCheck:
    """Check a task name against the RTOS six-character naming limit.

    Returns ``NameCheck.WARNING`` for over-long names unless *strict_six* is
    set, in which case they raise ``ValidationError`` like empty names do.
    """
    if not name:
        raise ValidationError("EmptyName", "component name must be non-empty")
    if len(name) > MAX_TASK_NAME:
        if strict_six:
            raise ValidationError(
                "TooLong", f"name {name!r} exceeds {MAX_TASK_NAME} characters"
            )
        return NameCheck.WARNING
    return NameCheck.OK


# --------------------------------------------------------------------------- #
# Parsing
# --------------------------------------------------------------------------- #

_ALLOWED_ATTRS = {
    "component": {"name", "desc", "type", "enabled", "cpuusage"},
    "implementation": {"bincode"},
    "periodictask": {"frequency", "runoncpu", "runoncup", "priority"},
    "inport": {"name", "interface", "type", "size"},
    "outport": {"name", "interface", "type", "size"},
    "property": {"name", "type", "value"},
}

_DECL_RE = re.compile(r"^\s*<\?\s*xml\b.*?\?>", re.DOTALL)
_ROOT_PREFIX_RE = re.compile(r"<\s*([A-Za-z_][\w.-]*):component\b")


def _local(tag: str) -> str:
    if tag.startswith("{"):
        tag = tag.split("}", 1)[1]
    return tag.split(":", 1)[-1]


def _to_tree(xml_text: str) -> ET.Element:
    # The declaration is dropped so that hand-written variants such as
    # "<? xml ...?>" are tolerated; ElementTree works on text anyway.
    text = _DECL_RE.sub("", xml_text, count=1)
    try:
        return ET.fromstring(text)
    except ET.ParseError as exc:
        match = _ROOT_PREFIX_RE.search(text)
        if match is None or "unbound prefix" not in str(exc):
            raise MalformedXml(str(exc)) from None
        prefix = match.group(1)
        patched = text[: match.end()] + f' xmlns:{prefix}="urn:drcom:{prefix}"' + text[match.end():]
        try:
            return ET.fromstring(patched)
        except ET.ParseError as exc2:
            raise MalformedXml(str(exc2)) from None


def _complain(strict: bool, message: str) -> None:
    if strict:
        raise UnknownContent(message)
    warnings.warn(message, DescriptorWarning, stacklevel=4)


def _check_attrs(elem: ET.Element, kind: str, strict: bool) -> dict[str, str]:
    attrs = {}
    for key, value in elem.attrib.items():
        if key.startswith("{"):
            continue  # namespaced attributes (xmlns and friends)
        if key not in _ALLOWED_ATTRS[kind]:
            _complain(strict, f"unknown attribute {key!r} on <{kind}>")
            continue
        attrs[key] = value
    return attrs


def _require(attrs: dict[str, str], key: str, field_name: str) -> str:
    if key not in attrs:
        raise MissingRequired(field_name)
    return attrs[key]


def _enum(enum_cls, text: str, field_name: str):
    wanted = text.strip().lower()
    for member in enum_cls:
        if member.value.lower() == wanted:
            return member
    raise InvalidValue(field_name, text)


def _int(text: str, field_name: str, minimum: int) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise InvalidValue(field_name, text, "not an integer") from None
    if value < minimum:
        raise InvalidValue(field_name, text, f"must be >= {minimum}")
    return value


def _float(text: str, field_name: str) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise InvalidValue(field_name, text, "not a number") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise InvalidValue(field_name, text, "not finite")
    return value


def _bool(text: str, field_name: str) -> bool:
    lowered = text.strip().lower()
    if lowered not in ("true", "false"):
        raise InvalidValue(field_name, text, "expected true or false")
    return lowered == "true"


def _parse_port(elem: ET.Element, kind: str, strict: bool) -> PortSpec:
    attrs = _check_attrs(elem, kind, strict)
    name = _require(attrs, "name", f"{kind}.name")
    if not name:
        raise InvalidValue(f"{kind}.name", name, "empty")
    interface = _enum(Interface, _require(attrs, "interface", f"{kind}.interface"), f"{kind}.interface")
    data_type = _enum(DataType, _require(attrs, "type", f"{kind}.type"), f"{kind}.type")
    size = _int(_require(attrs, "size", f"{kind}.size"), f"{kind}.size", 1)
    direction = Direction.IN if kind == "inport" else Direction.OUT
    return PortSpec(name, direction, interface, data_type, size)


def _parse_property(elem: ET.Element, strict: bool) -> PropertySpec:
    attrs = _check_attrs(elem, "property", strict)
    name = _require(attrs, "name", "property.name")
    value_type = _enum(ValueType, _require(attrs, "type", "property.type"), "property.type")
    value = _require(attrs, "value", "property.value")
    try:
        _parse_typed(value_type, value)
    except ValueError:
        raise InvalidValue("property.value", value, f"not a {value_type.value}") from None
    return PropertySpec(name, value_type, value)


def parse_descriptor(xml_text: str, *, strict: bool = True, strict_six: bool = False) -> ComponentDescriptor:
    """Parse descriptor XML into a :class:`ComponentDescriptor`.

    Args:
        xml_text: Descriptor document. Any namespace prefix on the root
            ``component`` element is accepted, declared or not.
        strict: Reject unknown elements and attributes. When false they are
            reported as ``DescriptorWarning`` and skipped.
        strict_six: Treat names longer than six characters as errors rather
            than warnings.

    Raises:
        ParseError: one of its subclasses, naming the offending field.
        ValidationError: empty name, or an over-long one under *strict_six*.
    """
    root = _to_tree(xml_text)
    if _local(root.tag) != "component":
        raise MalformedXml(f"root element is <{root.tag}>, expected <component>")

    attrs = _check_attrs(root, "component", strict)
    name = _require(attrs, "name", "name")
    if validate_name(name, strict_six) is NameCheck.WARNING:
        warnings.warn(
            f"name {name!r} is longer than {MAX_TASK_NAME} characters",
            DescriptorWarning,
            stacklevel=2,
        )
    task_type = _enum(TaskType, _require(attrs, "type", "type"), "type")
    desc = attrs.get("desc", "")
    enabled = _bool(attrs["enabled"], "enabled") if "enabled" in attrs else True
    cpu_usage = _float(attrs["cpuusage"], "cpuusage") if "cpuusage" in attrs else 0.0
    if not 0.0 <= cpu_usage <= 1.0:
        raise InvalidValue("cpuusage", attrs["cpuusage"], "must lie in [0, 1]")

    bincode = None
    task = None
    saw_task = False
    inports: list[PortSpec] = []
    outports: list[PortSpec] = []
    properties: list[PropertySpec] = []

    for child in root:
        kind = _local(child.tag)
        if kind == "implementation":
            if bincode is not None:
                raise InvalidValue("implementation", "", "declared more than once")
            child_attrs = _check_attrs(child, kind, strict)
            # Dotted identifiers cannot contain whitespace; wrapped lines can.
            bincode = "".join(_require(child_attrs, "bincode", "implementation.bincode").split())
            if not bincode:
                raise InvalidValue("implementation.bincode", "", "empty")
        elif kind == "periodictask":
            if saw_task:
                raise InvalidValue("periodictask", "", "declared more than once")
            saw_task = True
            child_attrs = _check_attrs(child, kind, strict)
            frequency = _float(_require(child_attrs, "frequency", "periodictask.frequency"), "periodictask.frequency")
            if "runoncpu" in child_attrs:
                cpu_text = child_attrs["runoncpu"]
            elif "runoncup" in child_attrs:
                cpu_text = child_attrs["runoncup"]
            else:
                raise MissingRequired("periodictask.runoncpu")
            run_on_cpu = _int(cpu_text, "periodictask.runoncpu", 0)
            priority = _int(_require(child_attrs, "priority", "periodictask.priority"), "periodictask.priority", 0)
            if not frequency > 0 or round(1e9 / frequency) <= 0:
                raise InvalidValue("periodictask.frequency", child_attrs["frequency"], "must give a positive period")
            task = PeriodicTaskSpec(frequency, run_on_cpu, priority)
        elif kind in ("inport", "outport"):
            port = _parse_port(child, kind, strict)
            (inports if kind == "inport" else outports).append(port)
        elif kind == "property":
            properties.append(_parse_property(child, strict))
        else:
            _complain(strict, f"unknown element <{kind}>")

    if bincode is None:
        raise MissingRequired("implementation")
    if task_type is TaskType.PERIODIC and task is None:
        raise TaskSpecMismatch("periodic component without a <periodictask> element")
    if task_type is TaskType.APERIODIC and task is not None:
        raise TaskSpecMismatch("aperiodic component with a <periodictask> element")

    seen = set()
    for port in inports + outports:
        if port.name in seen:
            raise DuplicatePortName(port.name)
        seen.add(port.name)

    return ComponentDescriptor(
        name=name,
        task_type=task_type,
        bincode=bincode,
        desc=desc,
        enabled=enabled,
        cpu_usage=cpu_usage,
        task=task,
        inports=tuple(inports),
        outports=tuple(outports),
        properties=tuple(properties),
    )


def load_descriptor(path, **kwargs) -> ComponentDescriptor:
    with open(path, encoding="utf-8") as fh:
        return parse_descriptor(fh.read(), **kwargs)


# --------------------------------------------------------------------------- #
# Serialization
# --------------------------------------------------------------------------- #


def _num(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _port_xml(kind: str, port: PortSpec) -> str:
    return (
        f"  <{kind} name={quoteattr(port.name)} interface={quoteattr(port.interface.value)}"
        f" type={quoteattr(port.data_type.value)} size=\"{port.size}\"/>"
    )


def serialize_descriptor(d: ComponentDescriptor) -> str:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        (
            f'<dr:component xmlns:dr="urn:drcom:dr" name={quoteattr(d.name)}'
            f" desc={quoteattr(d.desc)} type=\"{d.task_type.value}\""
            f" enabled=\"{'true' if d.enabled else 'false'}\" cpuusage=\"{_num(d.cpu_usage)}\">"
        ),
        f"  <implementation bincode={quoteattr(d.bincode)}/>",
    ]
    if d.task is not None:
        lines.append(
            f'  <periodictask frequency="{_num(d.task.frequency)}"'
            f' runoncpu="{d.task.run_on_cpu}" priority="{d.task.priority}"/>'
        )
    lines.extend(_port_xml("outport", p) for p in d.outports)
    lines.extend(_port_xml("inport", p) for p in d.inports)
    lines.extend(
        f"  <property name={quoteattr(p.name)} type=\"{p.value_type.value}\" value={quoteattr(p.value)}/>"
        for p in d.properties
    )
    lines.append("</dr:component>")
    return "\n".join(lines) + "\n"
