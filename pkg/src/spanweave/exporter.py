"""Span output: Jaeger-compatible JSON, lossless JSONL, summary stats.

Jaeger's JSON model wants microseconds, so its output is lossy; the JSONL
format keeps full picosecond timestamps and round-trips to identical spans.
Both writers emit fully sorted documents with a fixed key order so identical
span sets produce identical bytes regardless of arrival order.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field

from .model import (
    PS_PER_US,
    ComponentRef,
    ComponentType,
    Event,
    EventKind,
    Span,
    SpanKind,
)
from .parsers import IoError

JSONL_HEADER = '{"spanweave_jsonl":1}'


class SpanCollector:
    """Merge queue shared by all weavers; exclusive writer drains it at EOS."""

    def __init__(self):
        self._lock = threading.Lock()
        self._spans: list[Span] = []

    def emit(self, span: Span) -> None:
        with self._lock:
            self._spans.append(span)

    def drain(self) -> list[Span]:
        with self._lock:
            spans = self._spans
            self._spans = []
            return spans

    def __len__(self) -> int:
        with self._lock:
            return len(self._spans)


def _operation_name(span: Span) -> str:
    kind = span.kind
    attrs = span.attrs
    if kind is SpanKind.HostSyscall:
        detail = attrs.get("name", "?")
    elif kind in (SpanKind.HostMmio, SpanKind.NicMmioSpan):
        detail = f"0x{attrs.get('addr', 0):x}"
    elif kind in (SpanKind.HostDma, SpanKind.NicDmaSpan):
        detail = str(attrs.get("op", "?"))
    elif kind is SpanKind.HostInterrupt:
        detail = f"vec{attrs.get('vec', '?')}"
    elif kind is SpanKind.HostPciConfig:
        detail = f"0x{attrs.get('reg', 0):x}"
    elif kind is SpanKind.HostCpuActivity:
        detail = str(attrs.get("unit", "?"))
    elif kind in (SpanKind.NicTxSpan, SpanKind.NicRxSpan):
        detail = f"len{attrs.get('len', '?')}"
    else:  # NetHop
        detail = f"{attrs.get('node', '?')}/{attrs.get('dev', '?')}"
    return f"{kind.value} {detail}"


def _tag(key: str, value) -> dict:
    if isinstance(value, bool):
        vtype = "bool"
    elif isinstance(value, int):
        vtype = "int64"
    else:
        vtype = "string"
    return {"key": key, "type": vtype, "value": value}


def _jaeger_span(span: Span, process_id: str) -> dict:
    start_us = span.start_ts // PS_PER_US
    duration_us = (span.end_ts - span.start_ts) // PS_PER_US
    tags = [_tag(k, span.attrs[k]) for k in sorted(span.attrs)]
    if duration_us < 1:
        duration_us = 1
        tags.append(_tag("sub_us_duration", True))
    references = []
    if span.parent_span_id is not None:
        references.append(
            {
                "refType": "CHILD_OF",
                "traceID": span.trace_id,
                "spanID": span.parent_span_id,
            }
        )
    logs = []
    for event in span.events:
        fields = [_tag("event", event.kind.value)]
        fields.extend(_tag(k, event.attrs[k]) for k in sorted(event.attrs))
        logs.append({"timestamp": event.ts // PS_PER_US, "fields": fields})
    return {
        "traceID": span.trace_id,
        "spanID": span.span_id,
        "operationName": _operation_name(span),
        "references": references,
        "startTime": start_us,
        "duration": duration_us,
        "tags": tags,
        "logs": logs,
        "processID": process_id,
    }


def jaeger_document(spans: list[Span]) -> dict:
    by_trace: dict[str, list[Span]] = {}
    for span in spans:
        by_trace.setdefault(span.trace_id, []).append(span)
    traces = []
    for trace_id, members in by_trace.items():
        members.sort(key=lambda s: (s.start_ts, s.span_id))
        processes: dict[str, str] = {}
        rendered = []
        for span in members:
            pid = processes.get(span.component.id)
            if pid is None:
                pid = f"p{len(processes) + 1}"
                processes[span.component.id] = pid
            rendered.append(_jaeger_span(span, pid))
        process_map = {
            pid: {
                "serviceName": component_id,
                "tags": [_tag("component_type", _component_type(members, component_id))],
            }
            for component_id, pid in processes.items()
        }
        traces.append(
            {
                "sort_key": (members[0].start_ts, trace_id),
                "doc": {"traceID": trace_id, "spans": rendered, "processes": process_map},
            }
        )
    traces.sort(key=lambda t: t["sort_key"])
    return {"data": [t["doc"] for t in traces]}


def _component_type(members: list[Span], component_id: str) -> str:
    for span in members:
        if span.component.id == component_id:
            return span.component.type.value
    return "?"


def jaeger_bytes(spans: list[Span]) -> bytes:
    doc = jaeger_document(spans)
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode()


def _span_record(span: Span) -> dict:
    return {
        "trace_id": span.trace_id,
        "span_id": span.span_id,
        "parent_span_id": span.parent_span_id,
        "kind": span.kind.value,
        "component_id": span.component.id,
        "component_type": span.component.type.value,
        "start_ts": span.start_ts,
        "end_ts": span.end_ts,
        "attrs": {k: span.attrs[k] for k in sorted(span.attrs)},
        "events": [
            {
                "seq": e.seq,
                "ts": e.ts,
                "kind": e.kind.value,
                "attrs": {k: e.attrs[k] for k in sorted(e.attrs)},
            }
            for e in span.events
        ],
    }


def jsonl_lines(spans: list[Span]) -> list[str]:
    ordered = sorted(spans, key=lambda s: (s.trace_id, s.start_ts, s.span_id))
    lines = [JSONL_HEADER]
    lines.extend(json.dumps(_span_record(s), separators=(",", ":")) for s in ordered)
    return lines


def jsonl_bytes(spans: list[Span]) -> bytes:
    return ("\n".join(jsonl_lines(spans)) + "\n").encode()


def load_jsonl(path: str) -> list[Span]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    lines = raw.decode().splitlines()
    if not lines or json.loads(lines[0]) != {"spanweave_jsonl": 1}:
        raise IoError(f"{path}: missing spanweave_jsonl header")
    spans = []
    for line in lines[1:]:
        rec = json.loads(line)
        component = ComponentRef(rec["component_id"], ComponentType(rec["component_type"]))
        span = Span(
            rec["span_id"],
            rec["trace_id"],
            rec["parent_span_id"],
            SpanKind(rec["kind"]),
            component,
            rec["start_ts"],
            rec["end_ts"],
        )
        span.attrs = dict(rec["attrs"])
        span.events = [
            Event(e["seq"], e["ts"], component, EventKind(e["kind"]), dict(e["attrs"]))
            for e in rec["events"]
        ]
        spans.append(span)
    return spans


@dataclass(slots=True)
class SummaryStats:
    spans: int = 0
    traces: int = 0
    max_depth: int = 0
    spans_by_kind: dict = field(default_factory=dict)
    spans_by_component: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "spans": self.spans,
            "traces": self.traces,
            "max_depth": self.max_depth,
            "spans_by_kind": {k: self.spans_by_kind[k] for k in sorted(self.spans_by_kind)},
            "spans_by_component": {
                k: self.spans_by_component[k] for k in sorted(self.spans_by_component)
            },
        }


def summarize(spans: list[Span]) -> SummaryStats:
    stats = SummaryStats(spans=len(spans))
    stats.traces = len({s.trace_id for s in spans})
    by_id = {s.span_id: s for s in spans}
    depth_cache: dict[str, int] = {}

    def depth(span: Span) -> int:
        cached = depth_cache.get(span.span_id)
        if cached is not None:
            return cached
        # Walk iteratively: parent chains can be long in pathological inputs.
        chain = []
        current = span
        d = None
        while True:
            if current.span_id in depth_cache:
                d = depth_cache[current.span_id]
                break
            chain.append(current)
            parent = by_id.get(current.parent_span_id) if current.parent_span_id else None
            if parent is None:
                d = 0
                break
            current = parent
        for s in reversed(chain):
            d += 1
            depth_cache[s.span_id] = d
        return depth_cache[span.span_id]

    for span in spans:
        d = depth(span)
        if d > stats.max_depth:
            stats.max_depth = d
        stats.spans_by_kind[span.kind.value] = stats.spans_by_kind.get(span.kind.value, 0) + 1
        cid = span.component.id
        stats.spans_by_component[cid] = stats.spans_by_component.get(cid, 0) + 1
    return stats


def write_export(spans: list[Span], fmt: str, path: str) -> int:
    """Atomic export: a failed write never leaves a partial file behind."""
    if fmt == "jaeger":
        payload = jaeger_bytes(spans)
    elif fmt == "jsonl":
        payload = jsonl_bytes(spans)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"cannot write {path}: {exc}") from exc
    return len(payload)
