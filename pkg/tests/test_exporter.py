"""Export formats are frozen byte-for-byte.

The Jaeger snapshot below is assembled by hand from the documented layout
(key order, microsecond floor, tag typing, process numbering) so a change
in the writer shows up as a byte diff, not just a schema drift.
"""

import json
import threading

import pytest

from spanweave.exporter import (
    JSONL_HEADER,
    SpanCollector,
    jaeger_bytes,
    jaeger_document,
    jsonl_bytes,
    jsonl_lines,
    load_jsonl,
    summarize,
    write_export,
)
from spanweave.model import ComponentRef, ComponentType, Event, EventKind, Span, SpanKind
from spanweave.parsers import IoError

HOST = ComponentRef("host0", ComponentType.HOST)
NIC = ComponentRef("nic0", ComponentType.NIC)
NET = ComponentRef("switch0", ComponentType.NETWORK)

TRACE = "ab" * 16
ROOT_ID = "aaaa0000aaaa0000"
CHILD_ID = "bbbb1111bbbb1111"


def _snapshot_spans() -> list[Span]:
    root = Span(
        ROOT_ID,
        TRACE,
        None,
        SpanKind.HostSyscall,
        HOST,
        3_000_000,
        9_500_000,
        attrs={"num": 7, "name": "ioctl", "unit": "cpu0"},
        events=[
            Event(5, 3_000_000, HOST, EventKind.HostSyscallEnter,
                  {"num": 7, "name": "ioctl", "unit": "cpu0"}),
        ],
    )
    child = Span(
        CHILD_ID,
        TRACE,
        ROOT_ID,
        SpanKind.NicMmioSpan,
        NIC,
        3_200_000,
        3_400_000,
        attrs={"addr": 0x1000, "size": 4, "id": 3},
    )
    # deliberately out of order: the writer must sort by (start_ts, span_id)
    return [child, root]


# Built independently from the format description, not from writer output.
EXPECTED_JAEGER = {
    "data": [
        {
            "traceID": TRACE,
            "spans": [
                {
                    "traceID": TRACE,
                    "spanID": ROOT_ID,
                    "operationName": "HostSyscall ioctl",
                    "references": [],
                    "startTime": 3,
                    "duration": 6,
                    "tags": [
                        {"key": "name", "type": "string", "value": "ioctl"},
                        {"key": "num", "type": "int64", "value": 7},
                        {"key": "unit", "type": "string", "value": "cpu0"},
                    ],
                    "logs": [
                        {
                            "timestamp": 3,
                            "fields": [
                                {"key": "event", "type": "string", "value": "HostSyscallEnter"},
                                {"key": "name", "type": "string", "value": "ioctl"},
                                {"key": "num", "type": "int64", "value": 7},
                                {"key": "unit", "type": "string", "value": "cpu0"},
                            ],
                        },
                    ],
                    "processID": "p1",
                },
                {
                    "traceID": TRACE,
                    "spanID": CHILD_ID,
                    "operationName": "NicMmioSpan 0x1000",
                    "references": [
                        {"refType": "CHILD_OF", "traceID": TRACE, "spanID": ROOT_ID},
                    ],
                    "startTime": 3,
                    "duration": 1,
                    "tags": [
                        {"key": "addr", "type": "int64", "value": 4096},
                        {"key": "id", "type": "int64", "value": 3},
                        {"key": "size", "type": "int64", "value": 4},
                        {"key": "sub_us_duration", "type": "bool", "value": True},
                    ],
                    "logs": [],
                    "processID": "p2",
                },
            ],
            "processes": {
                "p1": {
                    "serviceName": "host0",
                    "tags": [{"key": "component_type", "type": "string", "value": "host"}],
                },
                "p2": {
                    "serviceName": "nic0",
                    "tags": [{"key": "component_type", "type": "string", "value": "nic"}],
                },
            },
        },
    ],
}


def test_jaeger_snapshot_bytes():
    expected = (json.dumps(EXPECTED_JAEGER, separators=(",", ":")) + "\n").encode()
    assert jaeger_bytes(_snapshot_spans()) == expected


def test_jaeger_empty_document():
    assert jaeger_bytes([]) == b'{"data":[]}\n'
    assert jaeger_document([]) == {"data": []}


def test_jaeger_duration_floor_is_one_microsecond():
    span = Span("e" * 16, TRACE, None, SpanKind.HostSyscall, HOST, 1_000, 1_000,
                attrs={"name": "read", "num": 0, "unit": "cpu0"})
    rendered = jaeger_document([span])["data"][0]["spans"][0]
    assert rendered["duration"] == 1
    assert rendered["tags"][-1] == {"key": "sub_us_duration", "type": "bool", "value": True}


def test_jaeger_bool_attr_typed_before_int():
    span = Span("e" * 16, TRACE, None, SpanKind.NetHop, NET, 0, 2_000_000,
                attrs={"node": "switch0", "dev": "eth0", "pkt": 9, "dropped": True})
    tags = jaeger_document([span])["data"][0]["spans"][0]["tags"]
    by_key = {t["key"]: t for t in tags}
    assert by_key["dropped"] == {"key": "dropped", "type": "bool", "value": True}
    assert by_key["pkt"] == {"key": "pkt", "type": "int64", "value": 9}
    assert by_key["node"]["type"] == "string"


@pytest.mark.parametrize(
    ("kind", "component", "attrs", "expected"),
    [
        (SpanKind.HostMmio, HOST, {"addr": 0x40001000, "size": 4}, "HostMmio 0x40001000"),
        (SpanKind.HostDma, HOST, {"op": "read", "id": 2}, "HostDma read"),
        (SpanKind.HostInterrupt, HOST, {"vec": 0}, "HostInterrupt vec0"),
        (SpanKind.HostPciConfig, HOST, {"reg": 0x30}, "HostPciConfig 0x30"),
        (SpanKind.HostCpuActivity, HOST, {"unit": "cpu1"}, "HostCpuActivity cpu1"),
        (SpanKind.NicTxSpan, NIC, {"len": 90}, "NicTxSpan len90"),
        (SpanKind.NicRxSpan, NIC, {"len": 1500}, "NicRxSpan len1500"),
        (SpanKind.NetHop, NET, {"node": "switch0", "dev": "eth1", "pkt": 1},
         "NetHop switch0/eth1"),
    ],
)
def test_operation_names(kind, component, attrs, expected):
    span = Span("e" * 16, TRACE, None, kind, component, 0, 5_000_000, attrs=dict(attrs))
    doc = jaeger_document([span])
    assert doc["data"][0]["spans"][0]["operationName"] == expected


def test_jaeger_traces_sorted_by_start_then_id():
    late = Span("1" * 16, "ff" * 16, None, SpanKind.HostSyscall, HOST, 2_000_000, 3_000_000,
                attrs={"name": "b", "num": 1, "unit": "cpu0"})
    early = Span("2" * 16, "00" * 16, None, SpanKind.HostSyscall, HOST, 1_000_000, 3_000_000,
                 attrs={"name": "a", "num": 1, "unit": "cpu0"})
    tie = Span("3" * 16, "0f" * 16, None, SpanKind.HostSyscall, HOST, 1_000_000, 3_000_000,
               attrs={"name": "c", "num": 1, "unit": "cpu0"})
    ids = [t["traceID"] for t in jaeger_document([late, early, tie])["data"]]
    assert ids == ["00" * 16, "0f" * 16, "ff" * 16]


def test_process_ids_assigned_per_trace_in_span_order():
    t2 = "cd" * 16
    a = Span("5" * 16, t2, None, SpanKind.NicTxSpan, NIC, 100, 100, attrs={"len": 60})
    b = Span("6" * 16, t2, "5" * 16, SpanKind.HostSyscall, HOST, 200, 900_000_000,
             attrs={"name": "x", "num": 1, "unit": "cpu0"})
    doc = jaeger_document(_snapshot_spans() + [a, b])
    # second trace starts earlier, so it sorts first and numbers nic0 as p1
    first, second = doc["data"]
    assert first["traceID"] == t2
    assert first["processes"]["p1"]["serviceName"] == "nic0"
    assert first["processes"]["p2"]["serviceName"] == "host0"
    assert second["processes"]["p1"]["serviceName"] == "host0"


def test_jsonl_round_trip_is_lossless(tmp_path):
    spans = _snapshot_spans()
    path = tmp_path / "spans.jsonl"
    write_export(spans, "jsonl", str(path))
    loaded = load_jsonl(str(path))
    assert jsonl_bytes(loaded) == path.read_bytes()
    assert sorted(loaded, key=lambda s: s.span_id) == sorted(spans, key=lambda s: s.span_id)


def test_jsonl_header_and_order():
    lines = jsonl_lines(_snapshot_spans())
    assert lines[0] == JSONL_HEADER
    recs = [json.loads(line) for line in lines[1:]]
    assert [r["span_id"] for r in recs] == [ROOT_ID, CHILD_ID]
    assert recs[0]["start_ts"] == 3_000_000  # picoseconds survive
    assert recs[0]["events"][0]["seq"] == 5
    assert jsonl_bytes([]) == (JSONL_HEADER + "\n").encode()


def test_load_jsonl_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"spans":[]}\n')
    with pytest.raises(IoError, match="spanweave_jsonl header"):
        load_jsonl(str(path))
    with pytest.raises(IoError):
        load_jsonl(str(tmp_path / "absent.jsonl"))


def test_write_export_failure_leaves_no_partial_file(tmp_path):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("")
    target = blocker / "out.json"
    with pytest.raises(IoError, match="cannot write"):
        write_export(_snapshot_spans(), "jaeger", str(target))
    assert list(tmp_path.iterdir()) == [blocker]


def test_write_export_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        write_export([], "csv", str(tmp_path / "x"))


def test_summarize_counts_and_depth():
    stats = summarize(_snapshot_spans()).as_dict()
    assert stats["spans"] == 2
    assert stats["traces"] == 1
    assert stats["max_depth"] == 2  # chain length root -> child
    assert stats["spans_by_kind"] == {"HostSyscall": 1, "NicMmioSpan": 1}
    assert stats["spans_by_component"] == {"host0": 1, "nic0": 1}


def test_collector_is_thread_safe():
    collector = SpanCollector()
    spans = _snapshot_spans()

    def worker():
        for _ in range(250):
            collector.emit(spans[0])

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(collector) == 1000
    assert len(collector.drain()) == 1000
    assert len(collector) == 0
