"""Config validation diagnostics, topology checks, graph construction."""

import json
import re

import pytest

from spanweave.model import ComponentType
from spanweave.parsers import IoError
from spanweave.simgen import default_config
from spanweave.wiring import ConfigError, build_and_run, load_config, net_tables, parse_config


def _raw() -> dict:
    # smallest topology exercising all three component types plus one
    # untraced endpoint (ext0) hanging off a switch port
    return {
        "components": [
            {"id": "host0", "type": "host"},
            {"id": "nic0", "type": "nic"},
            {"id": "switch0", "type": "network"},
        ],
        "sources": [
            {"component": "host0", "path": "host0.log", "dialect": "host"},
            {"component": "nic0", "path": "nic0.log", "dialect": "nic"},
            {"component": "switch0", "path": "switch0.log", "dialect": "net"},
        ],
        "channels": [
            {"a": "host0", "b": "nic0", "boundary": "pcie"},
            {"a": "nic0", "b": "switch0", "boundary": "eth"},
        ],
        "ports": {"switch0": {"dev0": "nic0", "dev1": "ext0"}},
        "routes": [{"hops": ["host0", "nic0", "switch0", "ext0"]}],
        "exporter": {"format": "jsonl", "path": "out.jsonl"},
    }


def test_minimal_config_parses(tmp_path):
    cfg = parse_config(_raw(), str(tmp_path))
    assert [c.id for c in cfg.components] == ["host0", "nic0", "switch0"]
    assert cfg.mode == "offline"
    assert cfg.sources[0].path == str(tmp_path / "host0.log")
    assert cfg.exporter == {"format": "jsonl", "path": "out.jsonl"}


def _mutate(raw, path, value):
    target = raw
    for step in path[:-1]:
        target = target[step]
    if value is _DEL:
        del target[path[-1]]
    else:
        target[path[-1]] = value
    return raw


_DEL = object()

_BAD = [
    (("nonsense",), True, "config: unknown field 'nonsense'"),
    (("components", 1, "id"), "host0", "components[1].id: duplicate 'host0'"),
    (("components", 2, "type"), "router", "components[2].type: expected host|nic|network"),
    (("sources", 0, "component"), "ghost", "sources[0].component: unknown component 'ghost'"),
    (("sources", 1, "dialect"), "pcap", "sources[1].dialect: expected host|nic|net"),
    (("sources", 2, "reorder_buffer"), -1, "sources[2].reorder_buffer"),
    (("sources", 2), _DEL, "sources: component 'switch0' has no source"),
    (("channels", 0, "b"), "ghost", "channels[0].b: unknown component 'ghost'"),
    (("channels", 0, "boundary"), "usb", "channels[0].boundary: expected pcie|eth"),
    (("channels", 0, "boundary"), "eth", "channels[0]: host-nic pair cannot use 'eth'"),
    (("ports", "host0"), {"dev0": "nic0"}, "ports.host0: not a network component"),
    (("ports", "switch0"), {}, "ports.switch0: must map devices to peers"),
    (("ports", "switch0", "dev9"), "host0", "ports.switch0.dev9: no channel between"),
    (("routes", 0, "hops"), ["host0"], "routes[0].hops: need at least 2 hops"),
    (("routes", 0, "hops", 2), "spine7", "routes[0].hops: unknown component 'spine7'"),
    (("routes", 0, "hops"), ["host0", "switch0"], "routes[0].hops: no channel between"),
    (("routes", 0, "hops"), ["nic0", "ext0"], "routes[0].hops: 'ext0' is not a port peer"),
    (("exporter", "format"), "csv", "exporter.format: expected jaeger|jsonl"),
    (("exporter", "path"), "", "exporter.path: required string"),
    (("mode",), "batch", "mode: expected offline|online"),
    (("queue_capacity",), 1, "queue_capacity: expected integer >= 2"),
    (("context_capacity",), 8, "context_capacity: expected integer >= 16"),
    (("causality_window_us",), -5, "causality_window_us: expected integer >= 0"),
    (("actors",), {"host0": [{"kind": "drop_all"}]}, "actors.host0[0].kind: unknown actor"),
    (("actors",), {"ghost": []}, "actors.ghost: unknown component"),
]


@pytest.mark.parametrize(("path", "value", "message"), _BAD, ids=[m for _, _, m in _BAD])
def test_rejected_configs_name_the_field(path, value, message):
    raw = _mutate(_raw(), list(path), value)
    with pytest.raises(ConfigError, match=re.escape(message)):
        parse_config(raw)


def test_top_level_must_be_object():
    with pytest.raises(ConfigError, match="top level"):
        parse_config(["components"])


def test_port_peer_required_for_switch_channels():
    raw = _raw()
    raw["ports"] = {"switch0": {"dev1": "ext0"}}  # nic0 channel peer unreachable
    raw["routes"] = []
    with pytest.raises(ConfigError, match=re.escape("ports.switch0: missing device for channel peer 'nic0'")):
        parse_config(raw)


def test_net_tables_for_generated_topology():
    cfg = parse_config(default_config())
    ports0, preds0 = net_tables(cfg, "switch0")
    assert ports0 == {"dev0": "nic0", "dev1": "switch1", "dev2": "bgsink0"}
    assert preds0 == {"switch1": ["nic0"], "nic0": ["switch1"], "bgsink0": ["switch1"]}
    ports1, preds1 = net_tables(cfg, "switch1")
    assert ports1 == {"dev0": "switch0", "dev1": "nic1", "dev2": "bgsrc0"}
    # bgsrc0 is untraced, so the switch0-bound bucket carries a None entry
    assert preds1 == {"nic1": ["switch0"], "switch0": ["nic1", None]}


def test_load_config_io_and_json_errors(tmp_path):
    with pytest.raises(IoError, match="cannot read config"):
        load_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(bad))


def test_load_config_resolves_paths_relative_to_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(_raw()))
    cfg = load_config(str(path))
    assert cfg.base_dir == str(tmp_path)
    assert cfg.sources[2].path == str(tmp_path / "switch0.log")
    assert cfg.component("switch0").type is ComponentType.NETWORK


def test_build_and_run_requires_source_files(tmp_path):
    cfg = parse_config(_raw(), str(tmp_path))
    (tmp_path / "host0.log").write_text("# empty\n")
    (tmp_path / "nic0.log").write_text("# empty\n")
    with pytest.raises(IoError, match="source for switch0 missing") as exc:
        build_and_run(cfg)
    assert exc.value.component == "switch0"


def test_build_and_run_empty_logs(tmp_path):
    cfg = parse_config(_raw(), str(tmp_path))
    for name in ("host0", "nic0", "switch0"):
        (tmp_path / f"{name}.log").write_text("# empty\n")
    stats = build_and_run(cfg)
    assert stats.mode == "single"
    assert stats.traces == 0
    out = tmp_path / "out.jsonl"
    assert out.read_bytes() == b'{"spanweave_jsonl":1}\n'
    stats = build_and_run(cfg, mode="threaded", fmt="jaeger", out=str(tmp_path / "o.json"))
    assert stats.mode == "threaded"
    assert (tmp_path / "o.json").read_bytes() == b'{"data":[]}\n'


def test_resolve_symbols_actor_needs_readable_map(tmp_path):
    raw = _raw()
    raw["actors"] = {"host0": [{"kind": "resolve_symbols", "map": "syms.txt"}]}
    cfg = parse_config(raw, str(tmp_path))
    for name in ("host0", "nic0", "switch0"):
        (tmp_path / f"{name}.log").write_text("# empty\n")
    with pytest.raises((ConfigError, IoError)):
        build_and_run(cfg)
    (tmp_path / "syms.txt").write_text("0x1000 a\n0x2000 b\n")
    assert build_and_run(cfg).traces == 0
