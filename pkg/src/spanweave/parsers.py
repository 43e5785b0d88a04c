"""Dialect parsers for the three component log formats.

All dialects are line-oriented ASCII with LF endings. A line that does not
match any production is a Skip (banners, debug chatter); a line that matches a
production prefix but has malformed fields is a ParseError. Parse errors never
abort a stream; out-of-order timestamps do, unless a reorder buffer is
configured on the source.

Host and NIC logs carry timestamps already in picosecond ticks. Network logs
use ns3-style "+<seconds>s" stamps which are converted by exact decimal string
shifting, never through floats: 12 fractional digits are significant, anything
beyond is truncated, and scientific notation is rejected.
"""

from __future__ import annotations

import heapq
import stat
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .model import (
    ComponentRef,
    ComponentType,
    Event,
    EventKind,
    SpanweaveError,
    ValidationError,
    validate_event,
)

MAX_LINE_BYTES = 64 * 1024


class StreamError(SpanweaveError):
    """Fatal stream condition; carries the component for attribution."""

    def __init__(self, message: str, component: str = ""):
        super().__init__(message)
        self.component = component


class IoError(StreamError):
    pass


class OutOfOrderTimestampError(StreamError):
    pass


class _Skip:
    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover
        return "SKIP"


SKIP = _Skip()


@dataclass(slots=True)
class ParseError:
    """Non-fatal reject of one line."""

    reason: str
    line_no: int = 0


@dataclass(slots=True)
class LogSource:
    """Where one component's events come from.

    dialect is "host", "nic" or "net". reorder_buffer > 0 tolerates bounded
    timestamp disorder by holding that many events in a min-heap.
    """

    path: Path
    dialect: str
    component: ComponentRef
    reorder_buffer: int = 0


_HEX = "h"
_DEC = "d"
_IDENT = "i"

# opcode -> (kind, ((attr, value-form), ...))
_HOST_OPCODES: dict[str, tuple[EventKind, tuple[tuple[str, str], ...]]] = {
    "CALL": (EventKind.HostCall, (("pc", _HEX), ("target", _HEX))),
    "RET": (EventKind.HostReturn, (("pc", _HEX),)),
    "SYSCALL": (EventKind.HostSyscallEnter, (("num", _DEC), ("name", _IDENT))),
    "SYSRET": (EventKind.HostSyscallExit, (("num", _DEC), ("ret", _DEC))),
    "MMIO_R": (EventKind.HostMmioRead, (("addr", _HEX), ("size", _DEC), ("id", _DEC))),
    "MMIO_W": (
        EventKind.HostMmioWrite,
        (("addr", _HEX), ("size", _DEC), ("val", _HEX), ("id", _DEC)),
    ),
    "MMIO_CR": (EventKind.HostMmioCompleteRead, (("id", _DEC),)),
    "MMIO_CW": (EventKind.HostMmioCompleteWrite, (("id", _DEC),)),
    "DMA_R": (EventKind.HostDmaRead, (("addr", _HEX), ("size", _DEC), ("id", _DEC))),
    "DMA_W": (EventKind.HostDmaWrite, (("addr", _HEX), ("size", _DEC), ("id", _DEC))),
    "DMA_C": (EventKind.HostDmaComplete, (("id", _DEC),)),
    "MSIX": (EventKind.HostMsiX, (("vec", _DEC),)),
    "INT_POST": (EventKind.HostIntPost, (("vec", _DEC),)),
    "INT_CLEAR": (EventKind.HostIntClear, (("vec", _DEC),)),
    "CTX_SWITCH": (EventKind.HostCtxSwitch, (("pid", _DEC),)),
    "PCI_CFG": (EventKind.HostPciConfig, (("reg", _HEX),)),
}

# phrase words -> (kind, required fields, optional fields)
_NIC_PHRASES: dict[
    tuple[str, ...], tuple[EventKind, tuple[tuple[str, str], ...], tuple[tuple[str, str], ...]]
] = {
    ("mmio", "read"): (
        EventKind.NicMmioRead,
        (("addr", _HEX), ("size", _DEC), ("id", _DEC)),
        (),
    ),
    ("mmio", "write"): (
        EventKind.NicMmioWrite,
        (("addr", _HEX), ("size", _DEC), ("id", _DEC)),
        (),
    ),
    ("mmio", "complete"): (EventKind.NicMmioComplete, (("id", _DEC),), ()),
    ("dma", "issue", "read"): (
        EventKind.NicDmaIssueRead,
        (("addr", _HEX), ("size", _DEC), ("id", _DEC)),
        (),
    ),
    ("dma", "issue", "write"): (
        EventKind.NicDmaIssueWrite,
        (("addr", _HEX), ("size", _DEC), ("id", _DEC)),
        (),
    ),
    ("dma", "complete"): (EventKind.NicDmaComplete, (("id", _DEC),), ()),
    ("tx", "pkt"): (EventKind.NicTx, (("len", _DEC), ("hash", _HEX)), ()),
    ("rx", "pkt"): (EventKind.NicRx, (("len", _DEC),), (("hash", _HEX),)),
    ("msix", "issue"): (EventKind.NicMsiXIssue, (("vec", _DEC),), ()),
}

_NET_OPS = {
    "ENQ": EventKind.NetEnqueue,
    "DEQ": EventKind.NetDequeue,
    "DROP": EventKind.NetDrop,
}


def _is_dec(tok: str) -> bool:
    return tok.isascii() and tok.isdigit()


def _ident_ok(tok: str) -> bool:
    if not tok or tok[0].isdigit():
        return False
    return all(c.isalnum() or c in "_.-" for c in tok)


def _parse_value(form: str, raw: str) -> int | str | None:
    """One attribute value; None means malformed."""
    if form == _DEC:
        return int(raw) if _is_dec(raw) else None
    if form == _HEX:
        if raw.startswith("0x") and len(raw) > 2:
            try:
                return int(raw[2:], 16)
            except ValueError:
                return None
        return None
    return raw if _ident_ok(raw) else None


# field tuples are module constants, so the merged lookup is built once each
_FORMS_CACHE: dict[tuple, dict] = {}


def _parse_kv(
    tokens: list[str],
    required: tuple[tuple[str, str], ...],
    optional: tuple[tuple[str, str], ...] = (),
) -> dict | ParseError:
    forms = _FORMS_CACHE.get((required, optional))
    if forms is None:
        forms = _FORMS_CACHE.setdefault((required, optional), dict(required) | dict(optional))
    attrs: dict[str, int | str] = {}
    for tok in tokens:
        key, eq, raw = tok.partition("=")
        if not eq:
            return ParseError(f"expected key=value, got {tok!r}")
        form = forms.get(key)
        if form is None:
            return ParseError(f"unexpected key {key!r}")
        if key in attrs:
            return ParseError(f"duplicate key {key!r}")
        value = _parse_value(form, raw)
        if value is None:
            return ParseError(f"malformed value for {key!r}: {raw!r}")
        attrs[key] = value
    for key, _ in required:
        if key not in attrs:
            return ParseError(f"missing key {key!r}")
    return attrs


def parse_host_line(
    line: str, component: ComponentRef, line_no: int = 0
) -> Event | _Skip | ParseError:
    """<tick>: <unit>: <OPCODE> key=value..."""
    tokens = line.split()
    if len(tokens) < 3:
        return SKIP
    t_tick, t_unit, t_op = tokens[0], tokens[1], tokens[2]
    if not (t_tick.endswith(":") and _is_dec(t_tick[:-1]) and t_unit.endswith(":")):
        return SKIP
    entry = _HOST_OPCODES.get(t_op)
    if entry is None:
        return SKIP
    kind, fields = entry
    attrs = _parse_kv(tokens[3:], fields)
    if isinstance(attrs, ParseError):
        attrs.line_no = line_no
        return attrs
    attrs["unit"] = t_unit[:-1]
    return Event(0, int(t_tick[:-1]), component, kind, attrs)


def parse_nic_line(
    line: str, component: ComponentRef, line_no: int = 0
) -> Event | _Skip | ParseError:
    """<ts> <nic-id>: <phrase> key=value..."""
    tokens = line.split()
    if len(tokens) < 3 or not _is_dec(tokens[0]) or not tokens[1].endswith(":"):
        return SKIP
    phrase3 = tuple(tokens[2:5])
    phrase2 = tuple(tokens[2:4])
    if phrase3 in _NIC_PHRASES:
        entry, rest = _NIC_PHRASES[phrase3], tokens[5:]
    elif phrase2 in _NIC_PHRASES:
        entry, rest = _NIC_PHRASES[phrase2], tokens[4:]
    else:
        return SKIP
    if tokens[1][:-1] != component.id:
        return ParseError(f"nic id {tokens[1][:-1]!r} does not match stream component", line_no)
    kind, required, optional = entry
    attrs = _parse_kv(rest, required, optional)
    if isinstance(attrs, ParseError):
        attrs.line_no = line_no
        return attrs
    return Event(0, int(tokens[0]), component, kind, attrs)


def seconds_to_ps(text: str) -> int | None:
    """Exact decimal seconds -> picoseconds; None if malformed.

    Only plain decimals: digits with at most one dot. At most 12 fractional
    digits are representable; extra digits are truncated toward zero.
    """
    if not text:
        return None
    int_part, dot, frac_part = text.partition(".")
    if not int_part and not frac_part:
        return None
    if int_part and not _is_dec(int_part):
        return None
    if dot and frac_part and not _is_dec(frac_part):
        return None
    frac12 = (frac_part + "000000000000")[:12] if dot else "000000000000"
    whole = int(int_part) if int_part else 0
    return whole * 10**12 + int(frac12)


def parse_net_line(
    line: str, component: ComponentRef, line_no: int = 0
) -> Event | _Skip | ParseError:
    """+<seconds>s <node>/<dev> <ENQ|DEQ|DROP> pkt=<n> len=<n>"""
    tokens = line.split()
    if len(tokens) < 3 or not tokens[0].startswith("+"):
        return SKIP
    stamp = tokens[0]
    if not stamp.endswith("s") or len(stamp) < 3:
        return SKIP
    ts = seconds_to_ps(stamp[1:-1])
    if ts is None:
        return ParseError(f"malformed timestamp {stamp!r}", line_no)
    node, slash, dev = tokens[1].partition("/")
    if not slash or not node or not dev:
        return ParseError(f"malformed node/dev {tokens[1]!r}", line_no)
    kind = _NET_OPS.get(tokens[2])
    if kind is None:
        return ParseError(f"unknown queue op {tokens[2]!r}", line_no)
    if node != component.id:
        return ParseError(f"node {node!r} does not match stream component", line_no)
    attrs = _parse_kv(tokens[3:], (("pkt", _DEC), ("len", _DEC)))
    if isinstance(attrs, ParseError):
        attrs.line_no = line_no
        return attrs
    attrs["node"] = node
    attrs["dev"] = dev
    return Event(0, ts, component, kind, attrs)


_PARSERS = {
    "host": parse_host_line,
    "nic": parse_nic_line,
    "net": parse_net_line,
}


def dialect_parser(dialect: str):
    try:
        return _PARSERS[dialect]
    except KeyError:
        raise ValueError(f"unknown dialect {dialect!r}") from None


def is_fifo(path: Path | str) -> bool:
    try:
        return stat.S_ISFIFO(os.stat(path).st_mode)
    except OSError:
        return False


def _read_lines(fh) -> Iterator[tuple[int, str | None]]:
    """Yield (line_no, line) with the 64 KiB cap; None marks an overlong line."""
    line_no = 0
    while True:
        line = fh.readline(MAX_LINE_BYTES + 1)
        if not line:
            return
        line_no += 1
        if len(line) > MAX_LINE_BYTES:
            while line and not line.endswith("\n"):
                line = fh.readline(MAX_LINE_BYTES + 1)
            yield line_no, None
        else:
            yield line_no, line


@dataclass(slots=True)
class StreamCounters:
    events: int = 0
    skipped: int = 0
    parse_errors: int = 0
    error_samples: list[ParseError] = field(default_factory=list)

    def record_error(self, err: ParseError) -> None:
        self.parse_errors += 1
        if len(self.error_samples) < 8:
            self.error_samples.append(err)


class EventStream:
    """Iterate validated, seq-numbered, timestamp-monotone events of a source.

    Works identically over regular files and named pipes; a pipe simply blocks
    until its writer closes. Counters are live during iteration.
    """

    def __init__(self, source: LogSource):
        self.source = source
        self.counters = StreamCounters()

    def __iter__(self) -> Iterator[Event]:
        src = self.source
        parse = dialect_parser(src.dialect)
        counters = self.counters
        try:
            fh = open(src.path, "r", encoding="utf-8", errors="replace")
        except OSError as exc:
            raise IoError(
                f"cannot open source for {src.component.id}: {exc}", src.component.id
            ) from exc
        heap: list[tuple[int, int, Event]] = []
        hold = src.reorder_buffer
        seq = 0
        last_ts = -1
        tie = 0

        def finalize(event: Event) -> Event:
            nonlocal seq, last_ts
            if event.ts < last_ts:
                raise OutOfOrderTimestampError(
                    f"{src.component.id}: ts {event.ts} after {last_ts} "
                    f"(event #{seq})",
                    src.component.id,
                )
            last_ts = event.ts
            event.seq = seq
            seq += 1
            return event

        with fh:
            for line_no, line in _read_lines(fh):
                if line is None:
                    counters.record_error(ParseError("line exceeds 64 KiB", line_no))
                    continue
                out = parse(line, src.component, line_no)
                if out is SKIP:
                    counters.skipped += 1
                    continue
                if isinstance(out, ParseError):
                    counters.record_error(out)
                    continue
                try:
                    validate_event(out)
                except ValidationError as exc:
                    counters.record_error(ParseError(str(exc), line_no))
                    continue
                counters.events += 1
                if hold:
                    tie += 1
                    heapq.heappush(heap, (out.ts, tie, out))
                    if len(heap) > hold:
                        yield finalize(heapq.heappop(heap)[2])
                else:
                    yield finalize(out)
            while heap:
                yield finalize(heapq.heappop(heap)[2])


def open_stream(source: LogSource) -> EventStream:
    """Validated event stream over one log source."""
    return EventStream(source)


def parse_all(source: LogSource) -> tuple[list[Event], StreamCounters]:
    """Eagerly drain a source; convenience for tests and small tools."""
    stream = open_stream(source)
    events = list(stream)
    return events, stream.counters
