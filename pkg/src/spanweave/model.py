"""Core vocabulary for full-system simulation traces.

Simulated time is integer picoseconds throughout (a 1 THz tick clock fits
typical cycle-accurate simulators and keeps arithmetic exact in 64 bits).
Each component type owns a closed set of event kinds and span kinds; anything
outside these sets is rejected at validation time rather than silently carried
along.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

PS_PER_US = 1_000_000
PS_PER_S = 10**12

# Attribute values are plain scalars so spans survive JSON round trips.
AttrValue = int | str | bool


class SpanweaveError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SpanweaveError):
    """An event violates the closed taxonomy or its attribute schema."""


class MissingAttrError(ValidationError):
    pass


class BadValueTypeError(ValidationError):
    pass


class KindComponentMismatchError(ValidationError):
    pass


class ComponentType(enum.Enum):
    HOST = "host"
    NIC = "nic"
    NETWORK = "network"


@dataclass(frozen=True, slots=True)
class ComponentRef:
    """Identity of one simulator instance, e.g. ("host0", HOST)."""

    id: str
    type: ComponentType


class EventKind(enum.Enum):
    # host
    HostCall = "HostCall"
    HostReturn = "HostReturn"
    HostSyscallEnter = "HostSyscallEnter"
    HostSyscallExit = "HostSyscallExit"
    HostMmioRead = "HostMmioRead"
    HostMmioWrite = "HostMmioWrite"
    HostMmioCompleteRead = "HostMmioCompleteRead"
    HostMmioCompleteWrite = "HostMmioCompleteWrite"
    HostDmaRead = "HostDmaRead"
    HostDmaWrite = "HostDmaWrite"
    HostDmaComplete = "HostDmaComplete"
    HostMsiX = "HostMsiX"
    HostIntPost = "HostIntPost"
    HostIntClear = "HostIntClear"
    HostCtxSwitch = "HostCtxSwitch"
    HostPciConfig = "HostPciConfig"
    # nic
    NicMmioRead = "NicMmioRead"
    NicMmioWrite = "NicMmioWrite"
    NicMmioComplete = "NicMmioComplete"
    NicDmaIssueRead = "NicDmaIssueRead"
    NicDmaIssueWrite = "NicDmaIssueWrite"
    NicDmaComplete = "NicDmaComplete"
    NicTx = "NicTx"
    NicRx = "NicRx"
    NicMsiXIssue = "NicMsiXIssue"
    # network
    NetEnqueue = "NetEnqueue"
    NetDequeue = "NetDequeue"
    NetDrop = "NetDrop"


class SpanKind(enum.Enum):
    HostSyscall = "HostSyscall"
    HostMmio = "HostMmio"
    HostDma = "HostDma"
    HostInterrupt = "HostInterrupt"
    HostPciConfig = "HostPciConfig"
    HostCpuActivity = "HostCpuActivity"
    NicMmioSpan = "NicMmioSpan"
    NicDmaSpan = "NicDmaSpan"
    NicTxSpan = "NicTxSpan"
    NicRxSpan = "NicRxSpan"
    NetHop = "NetHop"


_HOST_EVENT_KINDS = (
    EventKind.HostCall,
    EventKind.HostReturn,
    EventKind.HostSyscallEnter,
    EventKind.HostSyscallExit,
    EventKind.HostMmioRead,
    EventKind.HostMmioWrite,
    EventKind.HostMmioCompleteRead,
    EventKind.HostMmioCompleteWrite,
    EventKind.HostDmaRead,
    EventKind.HostDmaWrite,
    EventKind.HostDmaComplete,
    EventKind.HostMsiX,
    EventKind.HostIntPost,
    EventKind.HostIntClear,
    EventKind.HostCtxSwitch,
    EventKind.HostPciConfig,
)
_NIC_EVENT_KINDS = (
    EventKind.NicMmioRead,
    EventKind.NicMmioWrite,
    EventKind.NicMmioComplete,
    EventKind.NicDmaIssueRead,
    EventKind.NicDmaIssueWrite,
    EventKind.NicDmaComplete,
    EventKind.NicTx,
    EventKind.NicRx,
    EventKind.NicMsiXIssue,
)
_NET_EVENT_KINDS = (
    EventKind.NetEnqueue,
    EventKind.NetDequeue,
    EventKind.NetDrop,
)

_HOST_SPAN_KINDS = (
    SpanKind.HostSyscall,
    SpanKind.HostMmio,
    SpanKind.HostDma,
    SpanKind.HostInterrupt,
    SpanKind.HostPciConfig,
    SpanKind.HostCpuActivity,
)
_NIC_SPAN_KINDS = (
    SpanKind.NicMmioSpan,
    SpanKind.NicDmaSpan,
    SpanKind.NicTxSpan,
    SpanKind.NicRxSpan,
)
_NET_SPAN_KINDS = (SpanKind.NetHop,)

_EVENT_KINDS_BY_COMPONENT = {
    ComponentType.HOST: _HOST_EVENT_KINDS,
    ComponentType.NIC: _NIC_EVENT_KINDS,
    ComponentType.NETWORK: _NET_EVENT_KINDS,
}
_SPAN_KINDS_BY_COMPONENT = {
    ComponentType.HOST: _HOST_SPAN_KINDS,
    ComponentType.NIC: _NIC_SPAN_KINDS,
    ComponentType.NETWORK: _NET_SPAN_KINDS,
}

_COMPONENT_OF_EVENT_KIND = {
    kind: ctype
    for ctype, kinds in _EVENT_KINDS_BY_COMPONENT.items()
    for kind in kinds
}


def event_kinds(component_type: ComponentType) -> tuple[EventKind, ...]:
    """Closed event-kind registry for one component type, in stable order."""
    return _EVENT_KINDS_BY_COMPONENT[component_type]


def span_kinds(component_type: ComponentType) -> tuple[SpanKind, ...]:
    """Closed span-kind registry for one component type, in stable order."""
    return _SPAN_KINDS_BY_COMPONENT[component_type]


# Required attribute schema: name -> "u" (unsigned int) or "s" (text).
# Parsers may attach extras (unit, fn, ...) beyond these.
REQUIRED_ATTRS: dict[EventKind, tuple[tuple[str, str], ...]] = {
    EventKind.HostCall: (("pc", "u"), ("target", "u")),
    EventKind.HostReturn: (("pc", "u"),),
    EventKind.HostSyscallEnter: (("num", "u"), ("name", "s")),
    EventKind.HostSyscallExit: (("num", "u"), ("ret", "u")),
    EventKind.HostMmioRead: (("addr", "u"), ("size", "u"), ("id", "u")),
    EventKind.HostMmioWrite: (("addr", "u"), ("size", "u"), ("val", "u"), ("id", "u")),
    EventKind.HostMmioCompleteRead: (("id", "u"),),
    EventKind.HostMmioCompleteWrite: (("id", "u"),),
    EventKind.HostDmaRead: (("addr", "u"), ("size", "u"), ("id", "u")),
    EventKind.HostDmaWrite: (("addr", "u"), ("size", "u"), ("id", "u")),
    EventKind.HostDmaComplete: (("id", "u"),),
    EventKind.HostMsiX: (("vec", "u"),),
    EventKind.HostIntPost: (("vec", "u"),),
    EventKind.HostIntClear: (("vec", "u"),),
    EventKind.HostCtxSwitch: (("pid", "u"),),
    EventKind.HostPciConfig: (("reg", "u"),),
    EventKind.NicMmioRead: (("addr", "u"), ("size", "u"), ("id", "u")),
    EventKind.NicMmioWrite: (("addr", "u"), ("size", "u"), ("id", "u")),
    EventKind.NicMmioComplete: (("id", "u"),),
    EventKind.NicDmaIssueRead: (("addr", "u"), ("size", "u"), ("id", "u")),
    EventKind.NicDmaIssueWrite: (("addr", "u"), ("size", "u"), ("id", "u")),
    EventKind.NicDmaComplete: (("id", "u"),),
    EventKind.NicTx: (("len", "u"), ("hash", "u")),
    EventKind.NicRx: (("len", "u"),),
    EventKind.NicMsiXIssue: (("vec", "u"),),
    EventKind.NetEnqueue: (("pkt", "u"), ("len", "u"), ("node", "s"), ("dev", "s")),
    EventKind.NetDequeue: (("pkt", "u"), ("len", "u"), ("node", "s"), ("dev", "s")),
    EventKind.NetDrop: (("pkt", "u"), ("len", "u"), ("node", "s"), ("dev", "s")),
}


@dataclass(slots=True)
class Event:
    """One log line after parsing.

    seq is the 0-based position among parsed events of its stream; ts is
    picoseconds of simulated time.
    """

    seq: int
    ts: int
    component: ComponentRef
    kind: EventKind
    attrs: dict[str, AttrValue]


@dataclass(slots=True)
class Span:
    """A causally meaningful interval of one component's activity.

    parent_span_id is None for trace roots. end_ts may lie past the parent's
    end (asynchronous completion); only start ordering nests.
    """

    span_id: str
    trace_id: str
    parent_span_id: str | None
    kind: SpanKind
    component: ComponentRef
    start_ts: int
    end_ts: int
    attrs: dict[str, AttrValue] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)


@dataclass(slots=True)
class TraceContext:
    """Causality token handed across a component boundary.

    boundary is "pcie" or "eth"; key carries the matching attributes
    (op/addr/size/id for PCIe, len for Ethernet, op/vec for interrupts).
    """

    trace_id: str
    parent_span_id: str
    origin: ComponentRef
    boundary: str
    key: dict[str, AttrValue]
    ts: int


def validate_event(event: Event) -> None:
    """Check an event against the closed taxonomy and its attribute schema.

    Raises KindComponentMismatchError, MissingAttrError or BadValueTypeError;
    extra attributes are allowed.
    """
    expected = _COMPONENT_OF_EVENT_KIND.get(event.kind)
    if expected is None or event.component.type is not expected:
        raise KindComponentMismatchError(
            f"{event.kind.value} is not a {event.component.type.value} event kind"
        )
    if event.ts < 0:
        raise BadValueTypeError(f"negative timestamp {event.ts}")
    for name, want in REQUIRED_ATTRS[event.kind]:
        try:
            value = event.attrs[name]
        except KeyError:
            raise MissingAttrError(
                f"{event.kind.value} requires attr '{name}'"
            ) from None
        if want == "u":
            # bool is an int subclass; reject it for counters/addresses.
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise BadValueTypeError(
                    f"{event.kind.value}.{name} must be an unsigned integer, got {value!r}"
                )
        else:
            if not isinstance(value, str):
                raise BadValueTypeError(
                    f"{event.kind.value}.{name} must be text, got {value!r}"
                )
