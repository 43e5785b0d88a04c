"""Wiring configs: declarative JSON describing components, sources, channels,
routes, actors and export, plus the orchestration that turns one into a
running pipeline graph.

Validation is total: every malformed config raises ConfigError with a message
naming the offending field. Route hops may name endpoints that have no
component (untraced traffic sources/sinks); they must still appear in some
switch's port table so hops can be attributed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .exporter import SpanCollector, summarize, write_export
from .model import PS_PER_US, ComponentRef, ComponentType, EventKind, SpanweaveError
from .parsers import IoError, LogSource, is_fifo, open_stream
from .pipeline import (
    DEFAULT_QUEUE_CAPACITY,
    ActorStage,
    CoopQueue,
    ProducerStage,
    RunStats,
    SymbolMap,
    WeaverStage,
    actor_filter_kinds,
    actor_resolve_symbols,
    actor_time_window,
    collect_stats,
    run_cooperative,
    run_threaded,
)
from .weaver import (
    DEFAULT_CONTEXT_CAPACITY,
    DEFAULT_WINDOW_PS,
    ContextChannel,
    HostWeaver,
    NetWeaver,
    NicWeaver,
    Weaver,
)


class ConfigError(SpanweaveError):
    pass


_DIALECTS = {"host", "nic", "net"}
_BOUNDARIES = {"pcie", "eth"}
_MODES = {"offline", "online"}
_FORMATS = {"jaeger", "jsonl"}

# Legal channel boundary per unordered component-type pair.
_PAIR_BOUNDARY = {
    frozenset({ComponentType.HOST, ComponentType.NIC}): "pcie",
    frozenset({ComponentType.NIC, ComponentType.NETWORK}): "eth",
    frozenset({ComponentType.NETWORK}): "eth",
}


@dataclass(slots=True)
class ChannelSpec:
    a: str
    b: str
    boundary: str


@dataclass(slots=True)
class ActorSpec:
    kind: str
    args: dict


@dataclass(slots=True)
class WiringConfig:
    components: list[ComponentRef] = field(default_factory=list)
    sources: list[LogSource] = field(default_factory=list)
    channels: list[ChannelSpec] = field(default_factory=list)
    ports: dict = field(default_factory=dict)  # node -> {dev -> peer}
    routes: list[list[str]] = field(default_factory=list)
    actors: dict = field(default_factory=dict)  # component id -> [ActorSpec]
    exporter: dict = field(default_factory=dict)  # {format, path}
    mode: str = "offline"
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    context_capacity: int = DEFAULT_CONTEXT_CAPACITY
    causality_window_us: int = DEFAULT_WINDOW_PS // PS_PER_US
    base_dir: str = "."

    def component(self, cid: str) -> ComponentRef | None:
        for ref in self.components:
            if ref.id == cid:
                return ref
        return None


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_config(path: str) -> WiringConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))
    return parse_config(raw, base_dir)


def parse_config(raw: dict, base_dir: str = ".") -> WiringConfig:
    _require(isinstance(raw, dict), "config: top level must be an object")
    known = {
        "components",
        "sources",
        "channels",
        "ports",
        "routes",
        "actors",
        "exporter",
        "mode",
        "queue_capacity",
        "context_capacity",
        "causality_window_us",
    }
    for key in raw:
        _require(key in known, f"config: unknown field {key!r}")

    cfg = WiringConfig(base_dir=base_dir)

    seen_ids = set()
    for i, item in enumerate(raw.get("components", [])):
        _require(isinstance(item, dict), f"components[{i}]: must be an object")
        cid = item.get("id")
        _require(isinstance(cid, str) and cid, f"components[{i}].id: required string")
        _require(cid not in seen_ids, f"components[{i}].id: duplicate {cid!r}")
        seen_ids.add(cid)
        ctype = item.get("type")
        _require(
            ctype in ("host", "nic", "network"),
            f"components[{i}].type: expected host|nic|network, got {ctype!r}",
        )
        cfg.components.append(ComponentRef(cid, ComponentType(ctype)))

    sourced = set()
    for i, item in enumerate(raw.get("sources", [])):
        _require(isinstance(item, dict), f"sources[{i}]: must be an object")
        cid = item.get("component")
        ref = cfg.component(cid) if isinstance(cid, str) else None
        _require(ref is not None, f"sources[{i}].component: unknown component {cid!r}")
        _require(cid not in sourced, f"sources[{i}].component: second source for {cid!r}")
        sourced.add(cid)
        spath = item.get("path")
        _require(isinstance(spath, str) and spath, f"sources[{i}].path: required string")
        dialect = item.get("dialect")
        _require(
            dialect in _DIALECTS, f"sources[{i}].dialect: expected host|nic|net, got {dialect!r}"
        )
        reorder = item.get("reorder_buffer", 0)
        _require(
            isinstance(reorder, int) and not isinstance(reorder, bool) and reorder >= 0,
            f"sources[{i}].reorder_buffer: expected non-negative integer",
        )
        full = spath if os.path.isabs(spath) else os.path.join(base_dir, spath)
        cfg.sources.append(LogSource(full, dialect, ref, reorder))
    for ref in cfg.components:
        _require(ref.id in sourced, f"sources: component {ref.id!r} has no source")

    for i, item in enumerate(raw.get("channels", [])):
        _require(isinstance(item, dict), f"channels[{i}]: must be an object")
        a, b = item.get("a"), item.get("b")
        ra = cfg.component(a) if isinstance(a, str) else None
        rb = cfg.component(b) if isinstance(b, str) else None
        _require(ra is not None, f"channels[{i}].a: unknown component {a!r}")
        _require(rb is not None, f"channels[{i}].b: unknown component {b!r}")
        boundary = item.get("boundary")
        _require(
            boundary in _BOUNDARIES, f"channels[{i}].boundary: expected pcie|eth, got {boundary!r}"
        )
        legal = _PAIR_BOUNDARY.get(frozenset({ra.type, rb.type}))
        _require(
            legal == boundary,
            f"channels[{i}]: {ra.type.value}-{rb.type.value} pair cannot use {boundary!r}",
        )
        cfg.channels.append(ChannelSpec(a, b, boundary))

    ports = raw.get("ports", {})
    _require(isinstance(ports, dict), "ports: must be an object")
    for node, table in ports.items():
        ref = cfg.component(node)
        _require(
            ref is not None and ref.type is ComponentType.NETWORK,
            f"ports.{node}: not a network component",
        )
        _require(isinstance(table, dict) and table, f"ports.{node}: must map devices to peers")
        for dev, peer in table.items():
            _require(isinstance(peer, str) and peer, f"ports.{node}.{dev}: peer must be a string")
        cfg.ports[node] = dict(table)

    endpoint_names = set(seen_ids)
    for table in cfg.ports.values():
        endpoint_names.update(table.values())

    for i, item in enumerate(raw.get("routes", [])):
        _require(isinstance(item, dict), f"routes[{i}]: must be an object")
        hops = item.get("hops")
        _require(
            isinstance(hops, list) and len(hops) >= 2, f"routes[{i}].hops: need at least 2 hops"
        )
        for hop in hops:
            _require(
                hop in endpoint_names,
                f"routes[{i}].hops: unknown component {hop!r}",
            )
        cfg.routes.append(list(hops))

    actors = raw.get("actors", {})
    _require(isinstance(actors, dict), "actors: must be an object")
    for cid, chain in actors.items():
        _require(cfg.component(cid) is not None, f"actors.{cid}: unknown component")
        _require(isinstance(chain, list), f"actors.{cid}: must be a list")
        specs = []
        for j, spec in enumerate(chain):
            _require(isinstance(spec, dict), f"actors.{cid}[{j}]: must be an object")
            kind = spec.get("kind")
            _require(
                kind in ("filter_kinds", "resolve_symbols", "time_window"),
                f"actors.{cid}[{j}].kind: unknown actor {kind!r}",
            )
            args = {k: v for k, v in spec.items() if k != "kind"}
            specs.append(ActorSpec(kind, args))
        cfg.actors[cid] = specs

    exporter = raw.get("exporter", {})
    _require(isinstance(exporter, dict), "exporter: must be an object")
    if exporter:
        fmt = exporter.get("format")
        _require(fmt in _FORMATS, f"exporter.format: expected jaeger|jsonl, got {fmt!r}")
        epath = exporter.get("path")
        _require(isinstance(epath, str) and epath, "exporter.path: required string")
        cfg.exporter = {"format": fmt, "path": epath}

    mode = raw.get("mode", "offline")
    _require(mode in _MODES, f"mode: expected offline|online, got {mode!r}")
    cfg.mode = mode

    for key, default, minimum in (
        ("queue_capacity", DEFAULT_QUEUE_CAPACITY, 2),
        ("context_capacity", DEFAULT_CONTEXT_CAPACITY, 16),
        ("causality_window_us", DEFAULT_WINDOW_PS // PS_PER_US, 0),
    ):
        value = raw.get(key, default)
        _require(
            isinstance(value, int) and not isinstance(value, bool) and value >= minimum,
            f"{key}: expected integer >= {minimum}",
        )
        setattr(cfg, key, value)

    _check_topology(cfg)
    return cfg


def _check_topology(cfg: WiringConfig) -> None:
    linked = {frozenset({c.a, c.b}) for c in cfg.channels}
    for node, table in cfg.ports.items():
        for dev, peer in table.items():
            if cfg.component(peer) is not None:
                _require(
                    frozenset({node, peer}) in linked,
                    f"ports.{node}.{dev}: no channel between {node!r} and {peer!r}",
                )
    # Every traced neighbor of a switch must be reachable through a port.
    for spec in cfg.channels:
        for node, peer in ((spec.a, spec.b), (spec.b, spec.a)):
            ref = cfg.component(node)
            if ref is not None and ref.type is ComponentType.NETWORK:
                table = cfg.ports.get(node, {})
                _require(
                    peer in table.values(),
                    f"ports.{node}: missing device for channel peer {peer!r}",
                )
    for i, hops in enumerate(cfg.routes):
        for a, b in zip(hops, hops[1:]):
            ra, rb = cfg.component(a), cfg.component(b)
            if ra is not None and rb is not None:
                _require(
                    frozenset({a, b}) in linked,
                    f"routes[{i}].hops: no channel between {a!r} and {b!r}",
                )
            else:
                # untraced endpoints hang off a switch port
                node, end = (a, b) if rb is None else (b, a)
                nref = cfg.component(node)
                _require(
                    nref is not None
                    and nref.type is ComponentType.NETWORK
                    and end in cfg.ports.get(node, {}).values(),
                    f"routes[{i}].hops: {end!r} is not a port peer of {node!r}",
                )


def net_tables(cfg: WiringConfig, node: str) -> tuple[dict, dict]:
    """Port map and per-egress ingress predecessors for one switch.

    Predecessor None marks an untraced endpoint: hops fed by it root new
    traces instead of counting as unmatched.
    """
    ports = cfg.ports.get(node, {})
    preds: dict[str, list[str | None]] = {}
    traced = {c.id for c in cfg.components}
    for hops in cfg.routes:
        for i in range(1, len(hops) - 1):
            if hops[i] != node:
                continue
            egress = hops[i + 1]
            pred = hops[i - 1]
            entry = pred if pred in traced else None
            bucket = preds.setdefault(egress, [])
            if entry not in bucket:
                bucket.append(entry)
    return ports, preds


def _build_actor(spec: ActorSpec, cfg: WiringConfig, cid: str):
    args = spec.args
    if spec.kind == "filter_kinds":
        names = args.get("keep")
        _require(isinstance(names, list) and names, f"actors.{cid}: filter_kinds needs keep list")
        keep = set()
        for name in names:
            try:
                keep.add(EventKind(name))
            except ValueError:
                raise ConfigError(f"actors.{cid}: unknown event kind {name!r}") from None
        return actor_filter_kinds(keep)
    if spec.kind == "resolve_symbols":
        spath = args.get("map")
        _require(isinstance(spath, str) and spath, f"actors.{cid}: resolve_symbols needs map path")
        full = spath if os.path.isabs(spath) else os.path.join(cfg.base_dir, spath)
        try:
            symbols = SymbolMap.from_file(full)
        except ValueError as exc:
            raise ConfigError(f"actors.{cid}: {exc}") from None
        return actor_resolve_symbols(symbols)
    lo, hi = args.get("lo"), args.get("hi")
    for label, value in (("lo", lo), ("hi", hi)):
        _require(
            isinstance(value, int) and not isinstance(value, bool),
            f"actors.{cid}: time_window needs integer {label}",
        )
    _require(lo <= hi, f"actors.{cid}: time_window [{lo}, {hi}] is inverted")
    return actor_time_window(lo, hi)


def build_weavers(cfg: WiringConfig, sink: SpanCollector) -> dict[str, Weaver]:
    window_ps = cfg.causality_window_us * PS_PER_US
    weavers: dict[str, Weaver] = {}
    for ref in cfg.components:
        if ref.type is ComponentType.HOST:
            weavers[ref.id] = HostWeaver(ref, sink, window_ps)
        elif ref.type is ComponentType.NIC:
            weavers[ref.id] = NicWeaver(ref, sink, window_ps)
        else:
            ports, preds = net_tables(cfg, ref.id)
            weavers[ref.id] = NetWeaver(ref, sink, ports, preds, window_ps)
    for spec in cfg.channels:
        channel = ContextChannel(spec.a, spec.b, spec.boundary, cfg.context_capacity)
        weavers[spec.a].attach_outbound(channel.a_to_b)
        weavers[spec.b].attach_inbound(channel.a_to_b)
        weavers[spec.b].attach_outbound(channel.b_to_a)
        weavers[spec.a].attach_inbound(channel.b_to_a)
    return weavers


def build_and_run(
    cfg: WiringConfig,
    mode: str | None = None,
    fmt: str | None = None,
    out: str | None = None,
) -> RunStats:
    """Construct the pipeline graph from a config, run it, export, report."""
    for source in cfg.sources:
        if not os.path.exists(source.path):
            raise IoError(
                f"source for {source.component.id} missing: {source.path}",
                source.component.id,
            )

    sink = SpanCollector()
    weavers = build_weavers(cfg, sink)
    pipelines = []
    for source in cfg.sources:
        stream = open_stream(source)
        actors = [
            _build_actor(spec, cfg, source.component.id)
            for spec in cfg.actors.get(source.component.id, [])
        ]
        pipelines.append((stream, actors, weavers[source.component.id]))

    any_fifo = any(is_fifo(s.path) for s in cfg.sources)
    run_mode = mode or ("threaded" if cfg.mode == "online" else "single")
    if any_fifo:
        # a FIFO read would stall the cooperative loop indefinitely
        run_mode = "threaded"

    queue_peaks: list[int]
    if run_mode == "threaded":
        queue_peaks = run_threaded(pipelines, cfg.queue_capacity)
    else:
        stages = []
        queues = []
        for stream, actors, weaver in pipelines:
            q = CoopQueue(cfg.queue_capacity)
            queues.append(q)
            stages.append(ProducerStage(stream, q))
            for actor in actors:
                nq = CoopQueue(cfg.queue_capacity)
                queues.append(nq)
                stages.append(ActorStage(actor, q, nq, stream.source.component))
                q = nq
            stages.append(WeaverStage(weaver, q))
        run_cooperative(stages)
        queue_peaks = [q.peak for q in queues]

    spans = sink.drain()
    stats = collect_stats([p[0] for p in pipelines], list(weavers.values()))
    stats.traces = len({s.trace_id for s in spans})
    stats.queue_peak = max(queue_peaks, default=0)
    stats.mode = run_mode
    stats.summary = summarize(spans).as_dict()

    export_fmt = fmt or cfg.exporter.get("format")
    export_path = out
    if export_path is None and cfg.exporter:
        epath = cfg.exporter["path"]
        export_path = epath if os.path.isabs(epath) else os.path.join(cfg.base_dir, epath)
    if export_fmt and export_path:
        stats.export_bytes = write_export(spans, export_fmt, export_path)
    return stats
