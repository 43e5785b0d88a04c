"""Actors, bounded queues and the two schedulers."""

from __future__ import annotations

import pytest

from spanweave.exporter import SpanCollector
from spanweave.model import ComponentRef, ComponentType, Event, EventKind
from spanweave.parsers import LogSource, open_stream
from spanweave.pipeline import (
    ContractViolation,
    CoopQueue,
    ProducerStage,
    SymbolMap,
    ThreadedQueue,
    WeaverStage,
    WindowInverted,
    actor_filter_kinds,
    actor_resolve_symbols,
    actor_time_window,
    run_cooperative,
    run_threaded,
)
from spanweave.weaver import HostWeaver

HOST = ComponentRef("host0", ComponentType.HOST)


def _call(ts, target):
    return Event(0, ts, HOST, EventKind.HostCall, {"pc": 0, "target": target, "unit": "cpu0"})


def test_filter_keeps_only_requested_kinds():
    actor = actor_filter_kinds({EventKind.HostCall})
    call = _call(1, 2)
    ret = Event(0, 2, HOST, EventKind.HostReturn, {"pc": 1, "unit": "cpu0"})
    assert actor(call) is call
    assert actor(ret) is None


def test_symbols_resolve_to_nearest_lower_entry():
    table = SymbolMap([(0x400000, "foo"), (0x400500, "bar"), (0x401000, "baz")])
    assert table.resolve(0x400570) == "bar"
    assert table.resolve(0x400500) == "bar"
    assert table.resolve(0x401fff) == "baz"
    assert table.resolve(0x100) is None


def test_symbols_require_strictly_increasing_addresses():
    with pytest.raises(ValueError, match="strictly increasing"):
        SymbolMap([(0x400000, "foo"), (0x400000, "bar")])


def test_symbol_file_parses_and_skips_comments(tmp_path):
    path = tmp_path / "syms.txt"
    path.write_text("# text section\n0x400000 foo\n\n0x400500 bar\n")
    table = SymbolMap.from_file(str(path))
    assert table.resolve(0x400123) == "foo"


def test_resolver_annotates_calls_and_flags_unresolved():
    table = SymbolMap([(0x400500, "i40e_xmit")])
    actor = actor_resolve_symbols(table)
    hit = actor(_call(1, 0x400570))
    assert hit.attrs["fn"] == "i40e_xmit"
    assert "fn_unresolved" not in hit.attrs
    miss = actor(_call(2, 0x100))
    assert miss.attrs["fn"] == "0x100"
    assert miss.attrs["fn_unresolved"] is True


def test_time_window_passes_inclusive_range_only():
    actor = actor_time_window(100, 200)
    assert actor(_call(100, 1)) is not None
    assert actor(_call(200, 1)) is not None
    assert actor(_call(99, 1)) is None
    assert actor(_call(201, 1)) is None


def test_inverted_window_is_rejected_at_construction():
    with pytest.raises(WindowInverted):
        actor_time_window(200, 100)


def test_coop_queue_enforces_capacity_and_tracks_peak():
    q = CoopQueue(2)
    e = _call(1, 1)
    assert q.put(e) and q.put(e)
    assert not q.put(e)
    assert q.peak == 2
    q.pop()
    assert q.put(e)
    assert q.peak == 2


def test_threaded_queue_round_trips_in_order_and_bounds_occupancy():
    import threading

    abort = threading.Event()
    q = ThreadedQueue(capacity=256, abort=abort)
    events = [_call(t, t) for t in range(1000)]
    got = []

    def reader():
        for chunk in q.chunks():
            got.extend(chunk)

    thread = threading.Thread(target=reader)
    thread.start()
    for e in events:
        q.put(e)
    q.close()
    thread.join()
    assert got == events
    assert q.peak <= 256 + 128  # capacity plus one in-flight chunk


def _stream(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return open_stream(LogSource(str(path), "host", HOST))


def test_cooperative_pipeline_weaves_a_small_log(tmp_path):
    text = (
        "10: cpu0: SYSCALL num=1 name=a\n"
        "20: cpu0: SYSRET num=1 ret=0\n"
    )
    sink = SpanCollector()
    weaver = HostWeaver(HOST, sink)
    q = CoopQueue(4)
    run_cooperative([ProducerStage(_stream(tmp_path, "h.log", text), q), WeaverStage(weaver, q)])
    (span,) = sink.drain()
    assert (span.start_ts, span.end_ts) == (10, 20)


def test_cooperative_detects_global_stall(tmp_path):
    text = "10: cpu0: SYSCALL num=1 name=a\n"
    sink = SpanCollector()
    weaver = HostWeaver(HOST, sink)
    # an inbound direction that never advances its watermark
    from spanweave.weaver import ContextChannel

    channel = ContextChannel("nic0", "host0", "pcie", 8)
    weaver.attach_inbound(channel.a_to_b)
    q = CoopQueue(4)
    stages = [ProducerStage(_stream(tmp_path, "h.log", text), q), WeaverStage(weaver, q)]
    with pytest.raises(ContractViolation, match="host0"):
        run_cooperative(stages)


def test_threaded_run_produces_identical_spans_to_cooperative(tmp_path):
    text = "".join(
        f"{t}: cpu0: SYSCALL num=1 name=a\n{t+5}: cpu0: SYSRET num=1 ret=0\n"
        for t in range(10, 500, 10)
    )

    def weave(threaded):
        sink = SpanCollector()
        weaver = HostWeaver(HOST, sink)
        stream = _stream(tmp_path, f"h{threaded}.log", text)
        if threaded:
            run_threaded([(stream, [], weaver)], capacity=32)
        else:
            q = CoopQueue(32)
            run_cooperative([ProducerStage(stream, q), WeaverStage(weaver, q)])
        return [(s.span_id, s.trace_id, s.start_ts, s.end_ts) for s in sink.drain()]

    assert weave(False) == weave(True)


def test_producer_respects_backpressure(tmp_path):
    lines = "".join(f"{t}: cpu0: RET pc=0x1\n" for t in range(1, 300))
    stream = _stream(tmp_path, "h.log", lines)
    sink = SpanCollector()
    weaver = HostWeaver(HOST, sink)
    q = CoopQueue(16)
    run_cooperative([ProducerStage(stream, q), WeaverStage(weaver, q)])
    assert q.peak <= 16
