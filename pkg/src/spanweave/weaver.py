"""Span construction and cross-component context matching.

One weaver owns one component's event stream and builds that component's
spans. Causality crosses component boundaries as TraceContext records pushed
onto channel directions; matching is FIFO within a class key (mmio contexts
keyed by (addr, size), dma by operation, interrupts by vector, ethernet by
frame length) so ordered interconnects resolve deterministically. A mismatch
of verified attributes bumps a diagnostic counter instead of silently
reshuffling FIFO order.

The watermark contract makes matching independent of scheduling: a weaver
advertises the timestamp of its next unprocessed event on every outbound
direction (infinity at end of stream) and may process an event at ts only
once every inbound direction's watermark reaches ts. Contexts are eligible
when ctx.ts <= event.ts. The weaver holding the globally minimal next event
can always proceed, so deadlock is impossible for well-formed inputs. Inputs
where an effect shares its cause's exact timestamp across a boundary are
outside the contract; physical boundaries have at least one tick of latency.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from hashlib import blake2b

from .model import (
    AttrValue,
    ComponentRef,
    ComponentType,
    Event,
    EventKind,
    Span,
    SpanKind,
    TraceContext,
)
from .parsers import StreamError

# Sentinel watermark for a finished stream; larger than any 64-bit timestamp.
TS_INFINITY = 2**63

DEFAULT_CONTEXT_CAPACITY = 65536
DEFAULT_WINDOW_PS = 10_000_000  # 10 us causality window

# Headroom required on outbound directions before processing one event, so a
# single event's pushes can never fail halfway through.
_PUSH_HEADROOM = 8


class UnknownDeviceError(StreamError):
    pass


def span_id_for(component_id: str, n: int) -> str:
    return blake2b(f"{component_id}:{n}".encode(), digest_size=8).hexdigest()


def trace_id_for(component_id: str, ts: int, n: int) -> str:
    return blake2b(f"{component_id}:{ts}:{n}".encode(), digest_size=16).hexdigest()


class ChannelDirection:
    """One direction of a boundary channel: keyed FIFO queues + watermark."""

    __slots__ = (
        "sender",
        "receiver",
        "boundary",
        "capacity",
        "watermark",
        "queues",
        "size",
        "pushed",
        "matched",
    )

    def __init__(self, sender: str, receiver: str, boundary: str, capacity: int):
        self.sender = sender
        self.receiver = receiver
        self.boundary = boundary
        self.capacity = capacity
        self.watermark = -1
        self.queues: dict[tuple, deque[TraceContext]] = {}
        self.size = 0
        self.pushed = 0
        self.matched = 0

    def name(self) -> str:
        return f"{self.sender}->{self.receiver}"

    def push(self, class_key: tuple, ctx: TraceContext) -> None:
        queue = self.queues.get(class_key)
        if queue is None:
            queue = self.queues[class_key] = deque()
        queue.append(ctx)
        self.size += 1
        self.pushed += 1

    def head(self, class_key: tuple, ts: int) -> TraceContext | None:
        queue = self.queues.get(class_key)
        if queue and queue[0].ts <= ts:
            return queue[0]
        return None

    def pop(self, class_key: tuple) -> TraceContext:
        ctx = self.queues[class_key].popleft()
        self.size -= 1
        self.matched += 1
        return ctx

    def poll(self, class_key: tuple, ts: int) -> TraceContext | None:
        if self.head(class_key, ts) is None:
            return None
        return self.pop(class_key)

    def leftover(self) -> int:
        return self.size


class ContextChannel:
    """Bidirectional boundary between two components."""

    def __init__(self, a: str, b: str, boundary: str, capacity: int = DEFAULT_CONTEXT_CAPACITY):
        self.a_to_b = ChannelDirection(a, b, boundary, capacity)
        self.b_to_a = ChannelDirection(b, a, boundary, capacity)

    def directions(self) -> tuple[ChannelDirection, ChannelDirection]:
        return self.a_to_b, self.b_to_a


@dataclass(slots=True)
class WeaveCounters:
    spans: int = 0
    contexts_matched: int = 0
    contexts_unmatched: int = 0
    unmatched_completions: int = 0
    key_mismatches: int = 0
    orphan_events: int = 0
    truncated_spans: int = 0


class Weaver:
    """Base: id assignment, open-span accounting, watermark participation."""

    def __init__(self, component: ComponentRef, sink, window_ps: int = DEFAULT_WINDOW_PS):
        self.component = component
        self.sink = sink
        self.window_ps = window_ps
        self.inbound: list[ChannelDirection] = []
        self.outbound: list[ChannelDirection] = []
        self.counters = WeaveCounters()
        self.last_ts = -1
        self.finished = False
        self.open_count = 0
        self.peak_open = 0
        self._span_seq = 0
        self._root_seq = 0

    # -- wiring -----------------------------------------------------------

    def attach_inbound(self, direction: ChannelDirection) -> None:
        self.inbound.append(direction)

    def attach_outbound(self, direction: ChannelDirection) -> None:
        self.outbound.append(direction)

    # -- watermark contract -------------------------------------------------

    def advertise(self, ts: int) -> bool:
        changed = False
        for direction in self.outbound:
            if ts > direction.watermark:
                direction.watermark = ts
                changed = True
        return changed

    def may_process(self, ts: int) -> bool:
        for direction in self.inbound:
            if direction.watermark < ts:
                return False
        for direction in self.outbound:
            if direction.size > direction.capacity - _PUSH_HEADROOM:
                return False
        return True

    # -- span plumbing ------------------------------------------------------

    def _open(
        self,
        kind: SpanKind,
        ts: int,
        parent: Span | TraceContext | None,
        attrs: dict[str, AttrValue],
        event: Event | None,
    ) -> Span:
        span_id = span_id_for(self.component.id, self._span_seq)
        self._span_seq += 1
        if parent is None:
            trace_id = trace_id_for(self.component.id, ts, self._root_seq)
            self._root_seq += 1
            parent_id = None
        elif isinstance(parent, Span):
            trace_id = parent.trace_id
            parent_id = parent.span_id
        else:
            trace_id = parent.trace_id
            parent_id = parent.parent_span_id
        span = Span(span_id, trace_id, parent_id, kind, self.component, ts, ts)
        span.attrs.update(attrs)
        if event is not None:
            span.events.append(event)
        self.open_count += 1
        if self.open_count > self.peak_open:
            self.peak_open = self.open_count
        return span

    def _close(self, span: Span, ts: int, truncated: bool = False) -> None:
        span.end_ts = ts
        if truncated:
            span.attrs["truncated"] = True
            self.counters.truncated_spans += 1
        self.open_count -= 1
        self.counters.spans += 1
        self.sink.emit(span)

    def _poll(self, direction: ChannelDirection, class_key: tuple, ts: int) -> TraceContext | None:
        ctx = direction.poll(class_key, ts)
        if ctx is None:
            self.counters.contexts_unmatched += 1
            return None
        self.counters.contexts_matched += 1
        return ctx

    def _verify(self, ctx: TraceContext, attrs: dict, names: tuple[str, ...]) -> None:
        for name in names:
            if ctx.key.get(name) != attrs.get(name):
                self.counters.key_mismatches += 1
                return

    def _ctx(self, span: Span, boundary: str, key: dict[str, AttrValue], ts: int) -> TraceContext:
        return TraceContext(span.trace_id, span.span_id, self.component, boundary, key, ts)

    # -- lifecycle ----------------------------------------------------------

    def process(self, event: Event) -> None:
        self.last_ts = event.ts
        self._dispatch(event)

    def _dispatch(self, event: Event) -> None:
        raise NotImplementedError

    def _open_spans(self) -> list[Span]:
        raise NotImplementedError

    def finish(self) -> None:
        """End of stream: truncate whatever is still open, release peers."""
        if not self.finished:
            for span in self._open_spans():
                self._close(span, max(self.last_ts, span.start_ts), truncated=True)
            self.finished = True
        self.advertise(TS_INFINITY)


class HostWeaver(Weaver):
    """Spans from CPU, DMA engine and interrupt events of one host."""

    def __init__(self, component, sink, window_ps: int = DEFAULT_WINDOW_PS):
        if component.type is not ComponentType.HOST:
            raise ValueError("HostWeaver needs a host component")
        super().__init__(component, sink, window_ps)
        self.pcie_out: ChannelDirection | None = None
        self.pcie_in: ChannelDirection | None = None
        # Per-unit list of open spans in open order; innermost is last.
        self._unit_open: dict[str, list[Span]] = {}
        self._activity: dict[str, Span] = {}
        self._open_mmio: dict[tuple[str, int], Span] = {}
        self._open_dma: dict[int, Span] = {}
        self._open_int: dict[int, list[Span]] = {}
        self._wakeups: deque[tuple[Span, int]] = deque()

    def attach_inbound(self, direction: ChannelDirection) -> None:
        super().attach_inbound(direction)
        self.pcie_in = direction

    def attach_outbound(self, direction: ChannelDirection) -> None:
        super().attach_outbound(direction)
        self.pcie_out = direction

    # -- helpers ------------------------------------------------------------

    def _innermost(self, unit: str) -> Span | None:
        stack = self._unit_open.get(unit)
        return stack[-1] if stack else None

    def _push_unit(self, unit: str, span: Span) -> None:
        self._unit_open.setdefault(unit, []).append(span)

    def _pop_unit(self, unit: str, span: Span) -> None:
        stack = self._unit_open.get(unit)
        if stack and span in stack:
            stack.remove(span)

    def _activity_span(self, unit: str, ts: int) -> Span:
        span = self._activity.get(unit)
        if span is None:
            span = self._open(SpanKind.HostCpuActivity, ts, None, {"unit": unit}, None)
            self._activity[unit] = span
        return span

    def _close_activity(self, unit: str) -> None:
        span = self._activity.pop(unit, None)
        if span is not None:
            end = span.events[-1].ts if span.events else span.start_ts
            self._close(span, end)

    def _attach_or_activity(self, event: Event) -> None:
        unit = event.attrs.get("unit", "")
        target = self._innermost(unit)
        if target is not None:
            target.events.append(event)
        else:
            span = self._activity_span(unit, event.ts)
            span.events.append(event)

    def _syscall_parent(self, ts: int) -> Span | None:
        # Interrupt handlers wake blocked work; the next syscall entered
        # within the causality window continues that trace.
        wakeups = self._wakeups
        while wakeups and ts - wakeups[0][1] > self.window_ps:
            wakeups.popleft()
        if wakeups:
            return wakeups.popleft()[0]
        return None

    # -- event handlers -------------------------------------------------------

    def _dispatch(self, event: Event) -> None:
        handler = _HOST_HANDLERS[event.kind]
        handler(self, event)

    def _on_syscall_enter(self, event: Event) -> None:
        unit = event.attrs["unit"]
        self._close_activity(unit)
        parent = self._syscall_parent(event.ts)
        span = self._open(
            SpanKind.HostSyscall,
            event.ts,
            parent,
            {"num": event.attrs["num"], "name": event.attrs["name"], "unit": unit},
            event,
        )
        self._push_unit(unit, span)

    def _on_syscall_exit(self, event: Event) -> None:
        unit = event.attrs["unit"]
        stack = self._unit_open.get(unit, [])
        span = next(
            (s for s in reversed(stack) if s.kind is SpanKind.HostSyscall), None
        )
        if span is None:
            self.counters.unmatched_completions += 1
            return
        if span.attrs.get("num") != event.attrs["num"]:
            self.counters.key_mismatches += 1
        span.events.append(event)
        self._pop_unit(unit, span)
        self._close(span, event.ts)

    def _mmio_parent(self, unit: str, ts: int) -> Span:
        stack = self._unit_open.get(unit, [])
        for span in reversed(stack):
            if span.kind is SpanKind.HostSyscall:
                return span
        return self._activity_span(unit, ts)

    def _on_mmio_open(self, event: Event, rw: str) -> None:
        attrs = event.attrs
        unit = attrs["unit"]
        parent = self._mmio_parent(unit, event.ts)
        span_attrs = {"addr": attrs["addr"], "size": attrs["size"], "id": attrs["id"], "unit": unit}
        if "val" in attrs:
            span_attrs["val"] = attrs["val"]
        span = self._open(SpanKind.HostMmio, event.ts, parent, span_attrs, event)
        self._open_mmio[(rw, attrs["id"])] = span
        self._push_unit(unit, span)
        if self.pcie_out is not None:
            key = {"op": "mmio", "addr": attrs["addr"], "size": attrs["size"], "id": attrs["id"]}
            self.pcie_out.push(
                ("mmio", attrs["addr"], attrs["size"]),
                self._ctx(span, "pcie", key, event.ts),
            )

    def _on_mmio_read(self, event: Event) -> None:
        self._on_mmio_open(event, "r")

    def _on_mmio_write(self, event: Event) -> None:
        self._on_mmio_open(event, "w")

    def _on_mmio_complete(self, event: Event, rw: str) -> None:
        span = self._open_mmio.pop((rw, event.attrs["id"]), None)
        if span is None:
            self.counters.unmatched_completions += 1
            return
        span.events.append(event)
        self._pop_unit(span.attrs.get("unit", ""), span)
        self._close(span, event.ts)

    def _on_mmio_complete_read(self, event: Event) -> None:
        self._on_mmio_complete(event, "r")

    def _on_mmio_complete_write(self, event: Event) -> None:
        self._on_mmio_complete(event, "w")

    def _on_pci_config(self, event: Event) -> None:
        unit = event.attrs["unit"]
        parent = self._mmio_parent(unit, event.ts)
        span = self._open(
            SpanKind.HostPciConfig,
            event.ts,
            parent,
            {"reg": event.attrs["reg"], "unit": unit},
            event,
        )
        self._close(span, event.ts)

    def _on_dma(self, event: Event, op: str) -> None:
        attrs = event.attrs
        ctx = None
        if self.pcie_in is not None:
            ctx = self._poll(self.pcie_in, (op,), event.ts)
        else:
            self.counters.contexts_unmatched += 1
        if ctx is not None:
            self._verify(ctx, attrs, ("addr", "size"))
        span = self._open(
            SpanKind.HostDma,
            event.ts,
            ctx,
            {"addr": attrs["addr"], "size": attrs["size"], "id": attrs["id"], "op": op},
            event,
        )
        self._open_dma[attrs["id"]] = span

    def _on_dma_read(self, event: Event) -> None:
        self._on_dma(event, "dma-read")

    def _on_dma_write(self, event: Event) -> None:
        self._on_dma(event, "dma-write")

    def _on_dma_complete(self, event: Event) -> None:
        span = self._open_dma.pop(event.attrs["id"], None)
        if span is None:
            self.counters.unmatched_completions += 1
            return
        span.events.append(event)
        self._close(span, event.ts)

    def _on_msix(self, event: Event) -> None:
        vec = event.attrs["vec"]
        ctx = None
        if self.pcie_in is not None:
            ctx = self._poll(self.pcie_in, ("int", vec), event.ts)
        else:
            self.counters.contexts_unmatched += 1
        span = self._open(
            SpanKind.HostInterrupt,
            event.ts,
            ctx,
            {"vec": vec, "unit": event.attrs.get("unit", "")},
            event,
        )
        self._open_int.setdefault(vec, []).append(span)
        self._push_unit(event.attrs.get("unit", ""), span)

    def _on_int_post(self, event: Event) -> None:
        stack = self._open_int.get(event.attrs["vec"])
        if stack:
            stack[0].events.append(event)
        else:
            self._attach_or_activity(event)

    def _on_int_clear(self, event: Event) -> None:
        stack = self._open_int.get(event.attrs["vec"])
        if not stack:
            self.counters.unmatched_completions += 1
            return
        span = stack.pop(0)
        span.events.append(event)
        self._pop_unit(span.attrs.get("unit", ""), span)
        self._close(span, event.ts)
        self._wakeups.append((span, event.ts))

    def _on_plain(self, event: Event) -> None:
        self._attach_or_activity(event)

    def _open_spans(self) -> list[Span]:
        spans: list[Span] = []
        for stack in self._unit_open.values():
            spans.extend(stack)
        seen = {id(s) for s in spans}
        for table in (self._open_mmio, self._open_dma):
            for span in table.values():
                if id(span) not in seen:
                    spans.append(span)
                    seen.add(id(span))
        for stack in self._open_int.values():
            for span in stack:
                if id(span) not in seen:
                    spans.append(span)
                    seen.add(id(span))
        spans.extend(self._activity.values())
        self._unit_open.clear()
        self._open_mmio.clear()
        self._open_dma.clear()
        self._open_int.clear()
        self._activity.clear()
        spans.sort(key=lambda s: s.start_ts)
        return spans


_HOST_HANDLERS = {
    EventKind.HostCall: HostWeaver._on_plain,
    EventKind.HostReturn: HostWeaver._on_plain,
    EventKind.HostCtxSwitch: HostWeaver._on_plain,
    EventKind.HostSyscallEnter: HostWeaver._on_syscall_enter,
    EventKind.HostSyscallExit: HostWeaver._on_syscall_exit,
    EventKind.HostMmioRead: HostWeaver._on_mmio_read,
    EventKind.HostMmioWrite: HostWeaver._on_mmio_write,
    EventKind.HostMmioCompleteRead: HostWeaver._on_mmio_complete_read,
    EventKind.HostMmioCompleteWrite: HostWeaver._on_mmio_complete_write,
    EventKind.HostDmaRead: HostWeaver._on_dma_read,
    EventKind.HostDmaWrite: HostWeaver._on_dma_write,
    EventKind.HostDmaComplete: HostWeaver._on_dma_complete,
    EventKind.HostMsiX: HostWeaver._on_msix,
    EventKind.HostIntPost: HostWeaver._on_int_post,
    EventKind.HostIntClear: HostWeaver._on_int_clear,
    EventKind.HostPciConfig: HostWeaver._on_pci_config,
}


class NicWeaver(Weaver):
    """Spans for one NIC: doorbells, DMA transactions, wire transit."""

    def __init__(self, component, sink, window_ps: int = DEFAULT_WINDOW_PS):
        if component.type is not ComponentType.NIC:
            raise ValueError("NicWeaver needs a nic component")
        super().__init__(component, sink, window_ps)
        self.pcie_in: ChannelDirection | None = None
        self.pcie_out: ChannelDirection | None = None
        self.eth_in: ChannelDirection | None = None
        self.eth_out: ChannelDirection | None = None
        self._open_order: list[Span] = []
        self._open_mmio: dict[int, Span] = {}
        self._open_dma: dict[int, Span] = {}
        self._open_rx: Span | None = None
        self._last_closed: tuple[Span, int] | None = None

    def attach_inbound(self, direction: ChannelDirection) -> None:
        super().attach_inbound(direction)
        if direction.boundary == "pcie":
            self.pcie_in = direction
        else:
            self.eth_in = direction

    def attach_outbound(self, direction: ChannelDirection) -> None:
        super().attach_outbound(direction)
        if direction.boundary == "pcie":
            self.pcie_out = direction
        else:
            self.eth_out = direction

    def _close_nic(self, span: Span, ts: int) -> None:
        if span in self._open_order:
            self._open_order.remove(span)
        if span is self._open_rx:
            self._open_rx = None
        self._last_closed = (span, ts)
        self._close(span, ts)

    def _causal_parent(self, ts: int) -> Span | None:
        """Most recently opened still-open span, else one recently closed."""
        if self._open_order:
            return self._open_order[-1]
        if self._last_closed is not None:
            span, closed_ts = self._last_closed
            if ts - closed_ts <= self.window_ps:
                return span
        return None

    def _dispatch(self, event: Event) -> None:
        _NIC_HANDLERS[event.kind](self, event)

    def _on_mmio(self, event: Event) -> None:
        attrs = event.attrs
        ctx = None
        if self.pcie_in is not None:
            ctx = self._poll(self.pcie_in, ("mmio", attrs["addr"], attrs["size"]), event.ts)
        else:
            self.counters.contexts_unmatched += 1
        span = self._open(
            SpanKind.NicMmioSpan,
            event.ts,
            ctx,
            {"addr": attrs["addr"], "size": attrs["size"], "id": attrs["id"]},
            event,
        )
        self._open_mmio[attrs["id"]] = span
        self._open_order.append(span)

    def _on_mmio_complete(self, event: Event) -> None:
        span = self._open_mmio.pop(event.attrs["id"], None)
        if span is None:
            self.counters.unmatched_completions += 1
            return
        span.events.append(event)
        self._close_nic(span, event.ts)

    def _on_dma_issue(self, event: Event, op: str) -> None:
        attrs = event.attrs
        parent = self._causal_parent(event.ts)
        span = self._open(
            SpanKind.NicDmaSpan,
            event.ts,
            parent,
            {"addr": attrs["addr"], "size": attrs["size"], "id": attrs["id"], "op": op},
            event,
        )
        self._open_dma[attrs["id"]] = span
        self._open_order.append(span)
        if self.pcie_out is not None:
            key = {"op": op, "addr": attrs["addr"], "size": attrs["size"], "id": attrs["id"]}
            self.pcie_out.push((op,), self._ctx(span, "pcie", key, event.ts))

    def _on_dma_read(self, event: Event) -> None:
        self._on_dma_issue(event, "dma-read")

    def _on_dma_write(self, event: Event) -> None:
        self._on_dma_issue(event, "dma-write")

    def _on_dma_complete(self, event: Event) -> None:
        span = self._open_dma.pop(event.attrs["id"], None)
        if span is None:
            self.counters.unmatched_completions += 1
            return
        span.events.append(event)
        self._close_nic(span, event.ts)

    def _on_tx(self, event: Event) -> None:
        attrs = event.attrs
        parent = self._causal_parent(event.ts)
        span = self._open(
            SpanKind.NicTxSpan, event.ts, parent, {"len": attrs["len"]}, event
        )
        if self.eth_out is not None:
            self.eth_out.push(
                ("eth", attrs["len"]),
                self._ctx(span, "eth", {"len": attrs["len"]}, event.ts),
            )
        self._last_closed = (span, event.ts)
        self._close(span, event.ts)

    def _on_rx(self, event: Event) -> None:
        attrs = event.attrs
        if self._open_rx is not None:
            self._close_nic(self._open_rx, event.ts)
        ctx = None
        if self.eth_in is not None:
            ctx = self._poll(self.eth_in, ("eth", attrs["len"]), event.ts)
        else:
            self.counters.contexts_unmatched += 1
        span = self._open(SpanKind.NicRxSpan, event.ts, ctx, {"len": attrs["len"]}, event)
        self._open_rx = span
        self._open_order.append(span)

    def _on_msix_issue(self, event: Event) -> None:
        vec = event.attrs["vec"]
        parent = self._causal_parent(event.ts)
        if self._open_order:
            self._open_order[-1].events.append(event)
        else:
            self.counters.orphan_events += 1
        if parent is not None and self.pcie_out is not None:
            key = {"op": "interrupt", "vec": vec}
            self.pcie_out.push(("int", vec), self._ctx(parent, "pcie", key, event.ts))
        # Delivery is done once the interrupt leaves; the receive window ends.
        if self._open_rx is not None:
            self._close_nic(self._open_rx, event.ts)

    def _open_spans(self) -> list[Span]:
        spans = list(self._open_order)
        self._open_order.clear()
        self._open_mmio.clear()
        self._open_dma.clear()
        self._open_rx = None
        return spans


_NIC_HANDLERS = {
    EventKind.NicMmioRead: NicWeaver._on_mmio,
    EventKind.NicMmioWrite: NicWeaver._on_mmio,
    EventKind.NicMmioComplete: NicWeaver._on_mmio_complete,
    EventKind.NicDmaIssueRead: NicWeaver._on_dma_read,
    EventKind.NicDmaIssueWrite: NicWeaver._on_dma_write,
    EventKind.NicDmaComplete: NicWeaver._on_dma_complete,
    EventKind.NicTx: NicWeaver._on_tx,
    EventKind.NicRx: NicWeaver._on_rx,
    EventKind.NicMsiXIssue: NicWeaver._on_msix_issue,
}


class NetWeaver(Weaver):
    """One NetHop span per queue traversal of a switch or router."""

    def __init__(
        self,
        component,
        sink,
        ports: dict[str, str],
        ingress_preds: dict[str, list[str | None]],
        window_ps: int = DEFAULT_WINDOW_PS,
    ):
        if component.type is not ComponentType.NETWORK:
            raise ValueError("NetWeaver needs a network component")
        super().__init__(component, sink, window_ps)
        # dev name -> peer component (peer may be untraced)
        self.ports = ports
        # egress peer -> ingress predecessors per routing; None marks an
        # untraced endpoint whose hops legitimately root new traces.
        self.ingress_preds = ingress_preds
        self._in_by_peer: dict[str, ChannelDirection] = {}
        self._out_by_peer: dict[str, ChannelDirection] = {}
        self._open_hops: dict[int, Span] = {}

    def attach_inbound(self, direction: ChannelDirection) -> None:
        super().attach_inbound(direction)
        self._in_by_peer[direction.sender] = direction

    def attach_outbound(self, direction: ChannelDirection) -> None:
        super().attach_outbound(direction)
        self._out_by_peer[direction.receiver] = direction

    def _egress_peer(self, event: Event) -> str:
        dev = event.attrs["dev"]
        peer = self.ports.get(dev)
        if peer is None:
            raise UnknownDeviceError(
                f"{self.component.id}: unknown device {dev!r} at ts {event.ts}",
                self.component.id,
            )
        return peer

    def _ingress_ctx(self, egress_peer: str, length: int, ts: int) -> TraceContext | None:
        """Deterministic FIFO pick across candidate ingress directions.

        Returns None either when all candidates are empty (unmatched) or when
        an untraced endpoint feeds this hop; the caller distinguishes via
        counters we update here.
        """
        preds = self.ingress_preds.get(egress_peer, [])
        best: tuple[int, int, ChannelDirection] | None = None
        untraced = False
        for idx, pred in enumerate(preds):
            if pred is None:
                untraced = True
                continue
            direction = self._in_by_peer.get(pred)
            if direction is None:
                untraced = True
                continue
            head = direction.head(("eth", length), ts)
            if head is not None and (best is None or (head.ts, idx) < best[:2]):
                best = (head.ts, idx, direction)
        if best is not None:
            self.counters.contexts_matched += 1
            return best[2].pop(("eth", length))
        if not untraced:
            self.counters.contexts_unmatched += 1
        return None

    def _dispatch(self, event: Event) -> None:
        _NET_HANDLERS[event.kind](self, event)

    def _on_enqueue(self, event: Event) -> None:
        attrs = event.attrs
        egress_peer = self._egress_peer(event)
        stale = self._open_hops.pop(attrs["pkt"], None)
        if stale is not None:
            self._close(stale, event.ts, truncated=True)
        ctx = self._ingress_ctx(egress_peer, attrs["len"], event.ts)
        span = self._open(
            SpanKind.NetHop,
            event.ts,
            ctx,
            {"pkt": attrs["pkt"], "len": attrs["len"], "node": attrs["node"], "dev": attrs["dev"]},
            event,
        )
        self._open_hops[attrs["pkt"]] = span

    def _on_dequeue(self, event: Event) -> None:
        attrs = event.attrs
        egress_peer = self._egress_peer(event)
        span = self._open_hops.pop(attrs["pkt"], None)
        if span is None:
            self.counters.unmatched_completions += 1
            return
        span.events.append(event)
        direction = self._out_by_peer.get(egress_peer)
        if direction is not None:
            direction.push(
                ("eth", attrs["len"]),
                self._ctx(span, "eth", {"len": attrs["len"]}, event.ts),
            )
        self._close(span, event.ts)

    def _on_drop(self, event: Event) -> None:
        attrs = event.attrs
        self._egress_peer(event)  # device sanity even for drops
        span = self._open_hops.pop(attrs["pkt"], None)
        if span is None:
            self.counters.unmatched_completions += 1
            return
        span.events.append(event)
        span.attrs["dropped"] = True
        self._close(span, event.ts)

    def _open_spans(self) -> list[Span]:
        spans = sorted(self._open_hops.values(), key=lambda s: s.start_ts)
        self._open_hops.clear()
        return spans


_NET_HANDLERS = {
    EventKind.NetEnqueue: NetWeaver._on_enqueue,
    EventKind.NetDequeue: NetWeaver._on_dequeue,
    EventKind.NetDrop: NetWeaver._on_drop,
}
