"""Latency breakdown over reconstructed traces.

Attributes each span's self-time (duration minus the union of child
intervals) to its component, split into the request path and the response
path of a round trip. The split point is the far-side syscall: everything
it transitively caused is response, everything else after the root is
request. Integer picosecond arithmetic throughout, so the conservation
identity request + response + remainder == root duration is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Span, SpanKind, SpanweaveError
from .wiring import ConfigError, WiringConfig


class TraceNotFound(SpanweaveError):
    """Requested trace id is not present in the export."""


class IncompleteTrace(SpanweaveError):
    """Trace lacks the structure a breakdown needs."""


def span_self_time(span: Span, children: list[Span]) -> int:
    """Duration minus the union of child intervals clipped to the span."""
    intervals = []
    for child in children:
        lo = max(child.start_ts, span.start_ts)
        hi = min(child.end_ts, span.end_ts)
        if lo < hi:
            intervals.append((lo, hi))
    intervals.sort()
    covered = 0
    cur_lo = cur_hi = None
    for lo, hi in intervals:
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                covered += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        elif hi > cur_hi:
            cur_hi = hi
    if cur_hi is not None:
        covered += cur_hi - cur_lo
    return (span.end_ts - span.start_ts) - covered


@dataclass(slots=True)
class Breakdown:
    trace_id: str
    root_ps: int
    request: list  # (component_id, dwell ps) in route order
    response: list  # (component_id, dwell ps) in reverse route order
    remainder_ps: int

    def as_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "root_ps": self.root_ps,
            "request": [[c, v] for c, v in self.request],
            "response": [[c, v] for c, v in self.response],
            "remainder_ps": self.remainder_ps,
        }


@dataclass(slots=True)
class Aggregate:
    traces: int
    root_ps: float
    request: list  # (component_id, mean dwell ps)
    response: list
    remainder_ps: float

    def as_dict(self) -> dict:
        return {
            "traces": self.traces,
            "root_ps": self.root_ps,
            "request": [[c, v] for c, v in self.request],
            "response": [[c, v] for c, v in self.response],
            "remainder_ps": self.remainder_ps,
        }


def _traces_of(spans: list) -> dict[str, list]:
    traces: dict[str, list] = {}
    for span in spans:
        traces.setdefault(span.trace_id, []).append(span)
    return traces


def _route_from(cfg: WiringConfig, origin: str) -> list[str]:
    for route in cfg.routes:
        if route[0] == origin:
            return list(route)
    raise IncompleteTrace(f"no configured route starts at {origin!r}")


def _breakdown_one(trace_id: str, spans: list, cfg: WiringConfig) -> Breakdown:
    roots = [s for s in spans if s.parent_span_id is None]
    if len(roots) != 1:
        raise IncompleteTrace(f"trace {trace_id} has {len(roots)} roots, expected 1")
    root = roots[0]
    if root.kind is not SpanKind.HostSyscall:
        raise IncompleteTrace(f"trace {trace_id} root is {root.kind.value}, not a syscall")
    route = _route_from(cfg, root.component.id)
    far = route[-1]

    children: dict[str, list] = {}
    for span in spans:
        if span.parent_span_id is not None:
            children.setdefault(span.parent_span_id, []).append(span)
    self_time = {
        s.span_id: span_self_time(s, children.get(s.span_id, [])) for s in spans
    }

    far_syscalls = [
        s for s in spans if s.kind is SpanKind.HostSyscall and s.component.id == far
    ]
    if not far_syscalls:
        raise IncompleteTrace(f"trace {trace_id} has no syscall on far end {far!r}")
    pivot = min(far_syscalls, key=lambda s: (s.start_ts, s.span_id))

    response_ids = {pivot.span_id}
    frontier = [pivot.span_id]
    while frontier:
        nxt = []
        for sid in frontier:
            for child in children.get(sid, ()):
                if child.span_id not in response_ids:
                    response_ids.add(child.span_id)
                    nxt.append(child.span_id)
        frontier = nxt

    req_dwell: dict[str, int] = {}
    resp_dwell: dict[str, int] = {}
    for span in spans:
        if span.span_id == root.span_id:
            continue
        bucket = resp_dwell if span.span_id in response_ids else req_dwell
        bucket[span.component.id] = bucket.get(span.component.id, 0) + self_time[span.span_id]

    def ordered(dwell: dict[str, int], order: list[str]) -> list:
        rows = [(cid, dwell[cid]) for cid in order if cid in dwell]
        extras = sorted(set(dwell) - set(order))
        rows.extend((cid, dwell[cid]) for cid in extras)
        return rows

    request = ordered(req_dwell, route)
    response = ordered(resp_dwell, list(reversed(route)))
    root_ps = root.end_ts - root.start_ts
    remainder = root_ps - sum(v for _, v in request) - sum(v for _, v in response)
    return Breakdown(trace_id, root_ps, request, response, remainder)


def breakdown(spans: list, cfg: WiringConfig, trace_id: str) -> Breakdown:
    traces = _traces_of(spans)
    if trace_id not in traces:
        raise TraceNotFound(f"trace {trace_id!r} not found in export")
    return _breakdown_one(trace_id, traces[trace_id], cfg)


def aggregate(spans: list, cfg: WiringConfig) -> Aggregate:
    """Mean breakdown over every round-trip trace; other traces are skipped."""
    traces = _traces_of(spans)
    picked: list[Breakdown] = []
    for trace_id in sorted(traces):
        trace_spans = traces[trace_id]
        roots = [s for s in trace_spans if s.parent_span_id is None]
        if len(roots) != 1 or roots[0].kind is not SpanKind.HostSyscall:
            continue
        picked.append(_breakdown_one(trace_id, trace_spans, cfg))
    if not picked:
        raise IncompleteTrace("export contains no round-trip traces")

    n = len(picked)
    req_order = [c for c, _ in picked[0].request]
    resp_order = [c for c, _ in picked[0].response]
    req_sums = {c: 0 for c in req_order}
    resp_sums = {c: 0 for c in resp_order}
    for b in picked:
        if [c for c, _ in b.request] != req_order or [c for c, _ in b.response] != resp_order:
            raise IncompleteTrace(
                f"trace {b.trace_id} spans a different component set than the first trace"
            )
        for c, v in b.request:
            req_sums[c] += v
        for c, v in b.response:
            resp_sums[c] += v
    return Aggregate(
        traces=n,
        root_ps=sum(b.root_ps for b in picked) / n,
        request=[(c, req_sums[c] / n) for c in req_order],
        response=[(c, resp_sums[c] / n) for c in resp_order],
        remainder_ps=sum(b.remainder_ps for b in picked) / n,
    )


def compare(a: dict, b: dict) -> dict:
    """Per-component deltas between two breakdown documents (b minus a)."""
    rows = []
    for path in ("request", "response"):
        a_rows, b_rows = a.get(path), b.get(path)
        if a_rows is None or b_rows is None:
            raise ConfigError(f"breakdown document missing {path!r} section")
        a_comps = [c for c, _ in a_rows]
        b_comps = [c for c, _ in b_rows]
        if a_comps != b_comps:
            raise ConfigError(
                f"topologies differ on {path} path: {a_comps} vs {b_comps}"
            )
        for (comp, a_ps), (_, b_ps) in zip(a_rows, b_rows):
            rows.append(
                {
                    "path": path,
                    "component": comp,
                    "a_ps": a_ps,
                    "b_ps": b_ps,
                    "delta_ps": b_ps - a_ps,
                }
            )
    result = {"rows": rows}
    for key in ("root_ps", "remainder_ps"):
        if key in a and key in b:
            result[key] = {"a": a[key], "b": b[key], "delta": b[key] - a[key]}
    return result
