"""Dialect grammars, stream discipline and error accounting."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spanweave.model import ComponentRef, ComponentType, Event, EventKind
from spanweave.parsers import (
    SKIP,
    IoError,
    LogSource,
    OutOfOrderTimestampError,
    ParseError,
    open_stream,
    parse_all,
    parse_host_line,
    parse_net_line,
    parse_nic_line,
    seconds_to_ps,
)

HOST = ComponentRef("host0", ComponentType.HOST)
NIC = ComponentRef("nic0", ComponentType.NIC)
SW = ComponentRef("switch0", ComponentType.NETWORK)


def _host_source(tmp_path, text, reorder=0):
    path = tmp_path / "host0.log"
    path.write_text(text)
    return LogSource(str(path), "host", HOST, reorder)


# -- host dialect -----------------------------------------------------------


def test_host_syscall_line():
    event = parse_host_line("1000500: cpu0: SYSCALL num=44 name=sendto", HOST)
    assert isinstance(event, Event)
    assert event.ts == 1000500
    assert event.kind is EventKind.HostSyscallEnter
    assert event.attrs == {"num": 44, "name": "sendto", "unit": "cpu0"}


@pytest.mark.parametrize(
    "line,kind,attrs",
    [
        (
            "5: cpu1: CALL pc=0x401000 target=0x402010",
            EventKind.HostCall,
            {"pc": 0x401000, "target": 0x402010, "unit": "cpu1"},
        ),
        ("9: cpu0: RET pc=0xdead", EventKind.HostReturn, {"pc": 0xDEAD, "unit": "cpu0"}),
        (
            "12: cpu0: SYSRET num=44 ret=90",
            EventKind.HostSyscallExit,
            {"num": 44, "ret": 90, "unit": "cpu0"},
        ),
        (
            "33: cpu0: MMIO_W addr=0x40001000 size=4 val=0x1 id=7",
            EventKind.HostMmioWrite,
            {"addr": 0x40001000, "size": 4, "val": 1, "id": 7, "unit": "cpu0"},
        ),
        ("40: cpu0: MMIO_CW id=7", EventKind.HostMmioCompleteWrite, {"id": 7, "unit": "cpu0"}),
        (
            "50: dma0: DMA_R addr=0x80000000 size=90 id=2",
            EventKind.HostDmaRead,
            {"addr": 0x80000000, "size": 90, "id": 2, "unit": "dma0"},
        ),
        ("60: dma0: DMA_C id=2", EventKind.HostDmaComplete, {"id": 2, "unit": "dma0"}),
        ("70: cpu0: MSIX vec=3", EventKind.HostMsiX, {"vec": 3, "unit": "cpu0"}),
        ("71: cpu0: INT_POST vec=3", EventKind.HostIntPost, {"vec": 3, "unit": "cpu0"}),
        ("75: cpu0: INT_CLEAR vec=3", EventKind.HostIntClear, {"vec": 3, "unit": "cpu0"}),
        ("80: cpu0: CTX_SWITCH pid=1234", EventKind.HostCtxSwitch, {"pid": 1234, "unit": "cpu0"}),
        ("90: cpu0: PCI_CFG reg=0x98", EventKind.HostPciConfig, {"reg": 0x98, "unit": "cpu0"}),
    ],
)
def test_host_opcode_grammar(line, kind, attrs):
    event = parse_host_line(line, HOST)
    assert isinstance(event, Event)
    assert event.kind is kind
    assert event.attrs == attrs


def test_host_banner_and_unknown_opcode_skip():
    assert parse_host_line("# host-sim trace v1 id=host0 cpus=2 dma=1", HOST) is SKIP
    assert parse_host_line("", HOST) is SKIP
    assert parse_host_line("1000: cpu0: WARMUP done=1", HOST) is SKIP


def test_host_malformed_value_is_a_parse_error():
    out = parse_host_line("1000: cpu0: SYSCALL num=zz name=sendto", HOST, 17)
    assert isinstance(out, ParseError)
    assert out.line_no == 17
    assert "num" in out.reason


def test_host_missing_required_key_is_a_parse_error():
    out = parse_host_line("1000: cpu0: CALL pc=0x4", HOST)
    assert isinstance(out, ParseError)
    assert "target" in out.reason


def test_host_hex_values_require_0x_prefix():
    assert isinstance(parse_host_line("1: cpu0: RET pc=401000", HOST), ParseError)
    assert isinstance(parse_host_line("1: cpu0: RET pc=0x", HOST), ParseError)


# -- nic dialect ------------------------------------------------------------


@pytest.mark.parametrize(
    "line,kind",
    [
        ("100 nic0: mmio read addr=0x40001000 size=4 id=1", EventKind.NicMmioRead),
        ("100 nic0: mmio write addr=0x40001000 size=4 id=1", EventKind.NicMmioWrite),
        ("110 nic0: mmio complete id=1", EventKind.NicMmioComplete),
        ("120 nic0: dma issue read addr=0x80000000 size=90 id=2", EventKind.NicDmaIssueRead),
        ("120 nic0: dma issue write addr=0x80000000 size=90 id=2", EventKind.NicDmaIssueWrite),
        ("130 nic0: dma complete id=2", EventKind.NicDmaComplete),
        ("140 nic0: tx pkt len=90 hash=0xabc123", EventKind.NicTx),
        ("150 nic0: rx pkt len=1500 hash=0x1f", EventKind.NicRx),
        ("160 nic0: msix issue vec=0", EventKind.NicMsiXIssue),
    ],
)
def test_nic_phrase_grammar(line, kind):
    event = parse_nic_line(line, NIC)
    assert isinstance(event, Event)
    assert event.kind is kind
    assert event.ts == int(line.split()[0])


def test_nic_rx_hash_is_optional_but_tx_hash_is_not():
    rx = parse_nic_line("10 nic0: rx pkt len=64", NIC)
    assert isinstance(rx, Event) and "hash" not in rx.attrs
    tx = parse_nic_line("10 nic0: tx pkt len=64", NIC)
    assert isinstance(tx, ParseError) and "hash" in tx.reason


def test_nic_id_mismatch_is_an_error_not_a_skip():
    out = parse_nic_line("10 nic7: tx pkt len=64 hash=0x1", NIC)
    assert isinstance(out, ParseError)
    assert "nic7" in out.reason


def test_nic_banner_skips():
    assert parse_nic_line("# nic-sim trace v1 id=nic0 model=i40e", NIC) is SKIP
    assert parse_nic_line("10 nic0: phy linkup speed=100g", NIC) is SKIP


# -- net dialect ------------------------------------------------------------


def test_net_line_grammar():
    event = parse_net_line("+0.010009034016s switch0/dev1 ENQ pkt=1 len=90", SW)
    assert isinstance(event, Event)
    assert event.kind is EventKind.NetEnqueue
    # 0.010009034016 s expressed in integer picoseconds
    assert event.ts == 10_009_034_016
    assert event.attrs == {"pkt": 1, "len": 90, "node": "switch0", "dev": "dev1"}


@pytest.mark.parametrize("op,kind", [("DEQ", EventKind.NetDequeue), ("DROP", EventKind.NetDrop)])
def test_net_ops(op, kind):
    event = parse_net_line(f"+1.5s switch0/dev0 {op} pkt=9 len=1500", SW)
    assert isinstance(event, Event)
    assert event.kind is kind
    assert event.ts == 1_500_000_000_000


def test_net_wrong_node_is_an_error():
    out = parse_net_line("+1s switch9/dev0 ENQ pkt=1 len=2", SW)
    assert isinstance(out, ParseError)
    assert "switch9" in out.reason


def test_net_unknown_op_is_an_error():
    out = parse_net_line("+1s switch0/dev0 PAUSE pkt=1 len=2", SW)
    assert isinstance(out, ParseError)


def test_net_banner_skips():
    assert parse_net_line("# net-sim queue trace v1 node=switch0", SW) is SKIP


# Frozen expectations computed independently with Fraction("x") * 10**12.
@pytest.mark.parametrize(
    "text,ps",
    [
        ("0.010009034016", 10_009_034_016),
        ("1.5", 1_500_000_000_000),
        ("0", 0),
        ("12", 12_000_000_000_000),
        ("0.000000000001", 1),
        ("3.1415926535897932", 3_141_592_653_589),  # 13th digit truncated
    ],
)
def test_seconds_to_ps_exact_decimal(text, ps):
    assert seconds_to_ps(text) == ps


def test_seconds_to_ps_rejects_junk():
    assert seconds_to_ps("") is None
    assert seconds_to_ps(".") is None
    assert seconds_to_ps("1.2.3") is None
    assert seconds_to_ps("-1") is None
    assert seconds_to_ps("1e3") is None


# -- stream discipline ------------------------------------------------------


def test_stream_assigns_seq_only_to_parsed_events(tmp_path):
    text = (
        "# banner\n"
        "10: cpu0: SYSCALL num=1 name=a\n"
        "garbage that is not an event line q=zz\n"
        "20: cpu0: RET pc=0x1\n"
        "30: cpu0: RET pc=0x2\n"
        "40: cpu0: RET pc=0x3\n"
        "1000: cpu0: SYSRET num=1 ret=0\n"
        "1001: cpu0: CTX_SWITCH pid=zz\n"
    )
    events, counters = parse_all(_host_source(tmp_path, text))
    assert [e.seq for e in events] == [0, 1, 2, 3, 4]
    assert counters.events == 5
    assert counters.skipped == 2  # banner + free-form line
    assert counters.parse_errors == 1
    assert counters.error_samples[0].line_no == 8


def test_stream_error_samples_are_capped_at_eight(tmp_path):
    lines = [f"{t}: cpu0: RET pc=zz" for t in range(20)]
    _, counters = parse_all(_host_source(tmp_path, "\n".join(lines) + "\n"))
    assert counters.parse_errors == 20
    assert len(counters.error_samples) == 8


def test_stream_rejects_backwards_timestamps(tmp_path):
    text = "10: cpu0: RET pc=0x1\n5: cpu0: RET pc=0x2\n"
    with pytest.raises(OutOfOrderTimestampError, match="host0"):
        parse_all(_host_source(tmp_path, text))


def test_stream_allows_equal_timestamps(tmp_path):
    text = "10: cpu0: RET pc=0x1\n10: dma0: DMA_C id=1\n"
    events, _ = parse_all(_host_source(tmp_path, text))
    assert len(events) == 2


def test_reorder_buffer_restores_monotonicity(tmp_path):
    text = "10: cpu0: RET pc=0x1\n5: cpu0: RET pc=0x2\n20: cpu0: RET pc=0x3\n"
    events, _ = parse_all(_host_source(tmp_path, text, reorder=4))
    assert [e.ts for e in events] == [5, 10, 20]
    assert [e.seq for e in events] == [0, 1, 2]


def test_overlong_line_is_one_error_and_stream_continues(tmp_path):
    big = "10: cpu0: SYSCALL num=1 name=" + "a" * 70_000
    text = big + "\n20: cpu0: RET pc=0x1\n"
    events, counters = parse_all(_host_source(tmp_path, text))
    assert counters.parse_errors == 1
    assert "64 KiB" in counters.error_samples[0].reason
    assert [e.ts for e in events] == [20]


def test_missing_file_raises_io_error_naming_component(tmp_path):
    source = LogSource(str(tmp_path / "absent.log"), "host", HOST)
    with pytest.raises(IoError, match="host0"):
        list(open_stream(source))


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=120))
def test_parsers_are_total_over_arbitrary_lines(line):
    # any input, including control characters, yields Event | SKIP | ParseError
    for parse, comp in (
        (parse_host_line, HOST),
        (parse_nic_line, NIC),
        (parse_net_line, SW),
    ):
        out = parse(line.replace("\n", " "), comp, 1)
        assert out is SKIP or isinstance(out, (Event, ParseError))
