"""Synthetic workload generator with a ground-truth sidecar.

Emits dialect-exact logs for a fixed six-component topology (two hosts, two
NICs, two switches in series) running a request/response clock-sync workload,
plus truth.jsonl recording every span, parent edge, trace membership and
per-component dwell time. The truth file is the oracle that reconstruction
is tested against; real simulator runs cannot provide one.

Determinism: every stream draws from its own random.Random seeded by
(user seed, stream name). Scenario name is deliberately excluded from the
seed so rpc_noload and rpc_background sample identical latencies; background
load adds draws only on its own "bg" stream and shifts response timing by
the injected per-packet switch0 delay. Host and NIC dwell times are
therefore bit-equal across the two scenarios and the switch0 response/request
dwell difference is exactly the injected delta.

Cycles are spaced 1 ms apart and each cycle's activity fits well inside its
slot, so generation streams one cycle at a time in O(cycle) memory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from hashlib import blake2b
from random import Random

from .model import PS_PER_US, ComponentRef, ComponentType, Event
from .parsers import IoError, dialect_parser
from .wiring import ConfigError

SCENARIOS = ("rpc_noload", "rpc_background")

PERIOD_PS = 1_000_000_000  # one request cycle per simulated millisecond
START_PS = 10_000_000_000
WIRE_PS = 1_000_000  # per-link propagation, 1 us
REQ_LEN = 90
BG_LEN = 1500
BG_PER_CYCLE = 3
DOORBELL_ADDR = 0x40001000
MSIX_VEC = 0
MAX_DQ_US = 500

TOPOLOGY = (
    ("host0", "host"),
    ("nic0", "nic"),
    ("switch0", "network"),
    ("switch1", "network"),
    ("nic1", "nic"),
    ("host1", "host"),
)

_SYMBOLS = [
    "ntp_client_tick",
    "ntp_build_packet",
    "sock_sendmsg",
    "udp_sendmsg",
    "ip_finish_output",
    "dev_queue_xmit",
    "i40e_xmit_frame",
    "ring_doorbell",
    "memcpy_to_ring",
    "irq_entry",
    "i40e_msix_handler",
    "napi_poll",
    "udp_rcv",
    "sock_queue_rcv",
    "wake_up_process",
    "ntp_process_packet",
    "ntp_build_reply",
    "clock_adjtime_impl",
    "timekeeping_adjust",
    "schedule_out",
]
SYM_BASE = 0x401000
SYM_STRIDE = 0x800


def _symbol_table() -> list[tuple[int, str]]:
    return [(SYM_BASE + i * SYM_STRIDE, name) for i, name in enumerate(_SYMBOLS)]


def _stream_rng(seed: int, stream: str) -> Random:
    digest = blake2b(f"{seed}|{stream}".encode(), digest_size=8).digest()
    return Random(int.from_bytes(digest, "big"))


def _net_stamp(ts: int) -> str:
    return f"+{ts // 10**12}.{ts % 10**12:012d}s"


@dataclass(slots=True)
class GenResult:
    out_dir: str
    logs: dict  # component id -> path
    truth_path: str
    config_path: str
    syms_path: str
    events: dict  # component id -> emitted event-line count
    requests: int

    def as_dict(self) -> dict:
        return {
            "out_dir": self.out_dir,
            "logs": {k: self.logs[k] for k in sorted(self.logs)},
            "truth": self.truth_path,
            "config": self.config_path,
            "symbols": self.syms_path,
            "events": {k: self.events[k] for k in sorted(self.events)},
            "requests": self.requests,
        }


# ---------------------------------------------------------------------------
# per-cycle sampling: one fixed draw sequence per stream per cycle


def _host_draws(rng: Random) -> dict:
    d = {}
    d["jitter"] = rng.randrange(0, 10_000_000)
    nframes = rng.randint(3, 8)
    d["calls"] = [
        (
            rng.randrange(50_000, 300_000),
            rng.randrange(len(_SYMBOLS)),
            rng.randrange(0x100),
            rng.randrange(len(_SYMBOLS)),
            rng.randrange(0x100),
        )
        for _ in range(nframes)
    ]
    d["rets"] = [
        (rng.randrange(50_000, 200_000), rng.randrange(len(_SYMBOLS)), rng.randrange(0x100))
        for _ in range(nframes)
    ]
    d["drv"] = rng.randrange(200_000, 1_000_000)
    d["pcie"] = rng.randrange(150_000, 400_000)
    d["dma_first"] = rng.randrange(300_000, 900_000)
    d["dma_second"] = rng.randrange(300_000, 900_000)
    d["intr"] = rng.randrange(400_000, 1_200_000)
    d["done"] = rng.randrange(2_000_000, 3_000_000)
    d["ret_gap"] = rng.randrange(200_000, 800_000)
    d["wake"] = rng.randrange(1_000_000, 5_000_000)
    d["adj_off"] = rng.randrange(2_000_000, 4_000_000)
    d["adj_dur"] = rng.randrange(300_000, 900_000)
    d["pid"] = rng.randrange(100, 32768)
    d["ctxgap"] = rng.randrange(1_000_000, 3_000_000)
    d["val"] = rng.randrange(0, 2**32)
    return d


def _nic_draws(rng: Random) -> dict:
    return {
        "nmmio": rng.randrange(100_000, 300_000),
        "g1": rng.randrange(100_000, 400_000),
        "g2": rng.randrange(100_000, 400_000),
        "gaprx": rng.randrange(300_000, 800_000),
        "g3": rng.randrange(200_000, 600_000),
        "tx_hash": rng.randrange(0, 2**32),
        "rx_hash": rng.randrange(0, 2**32),
    }


def _addr(base: int, k: int) -> int:
    return base + (k % 4096) * 0x100


class _Cycle:
    """Event rows and truth records for one request cycle."""

    def __init__(self, k: int, scenario: str, rngs: dict, dq_ps: int):
        self.k = k
        self.rows: dict[str, list] = {cid: [] for cid, _ in TOPOLOGY}
        self.records: list[dict] = []
        self.span_events: dict[str, list] = {}
        self._build(scenario, rngs, dq_ps)

    # row: (ts, line, span_label or None)
    def _row(self, cid: str, ts: int, line: str, label: str | None) -> None:
        self.rows[cid].append((ts, line, label))

    def _span(
        self,
        label: str,
        cid: str,
        kind: str,
        start: int,
        end: int,
        parent: str | None,
        trace: str,
    ) -> None:
        self.records.append(
            {
                "type": "span",
                "label": label,
                "component": cid,
                "kind": kind,
                "start_ts": start,
                "end_ts": end,
                "parent": parent,
                "trace": trace,
            }
        )
        self.span_events[label] = []

    def _host(self, cid: str, ts: int, unit: str, body: str, label: str) -> None:
        self._row(cid, ts, f"{ts}: {unit}: {body}", label)

    def _nic(self, cid: str, ts: int, body: str, label: str) -> None:
        self._row(cid, ts, f"{ts} {cid}: {body}", label)

    def _net(self, cid: str, ts: int, dev: str, op: str, pkt: int, length: int, label: str) -> None:
        self._row(cid, ts, f"{_net_stamp(ts)} {cid}/{dev} {op} pkt={pkt} len={length}", label)

    def _call_chain(self, cid: str, unit: str, t: int, calls: list, label: str) -> int:
        table = _symbol_table()
        for gap, pi, po, ti, to in calls:
            t += gap
            pc = table[pi][0] + po
            target = table[ti][0] + to
            self._host(cid, t, unit, f"CALL pc=0x{pc:x} target=0x{target:x}", label)
        return t

    def _ret_chain(self, cid: str, unit: str, t: int, rets: list, label: str) -> None:
        table = _symbol_table()
        for gap, pi, po in rets:
            t += gap
            pc = table[pi][0] + po
            self._host(cid, t, unit, f"RET pc=0x{pc:x}", label)

    def _build(self, scenario: str, rngs: dict, dq_ps: int) -> None:
        k = self.k
        t0 = START_PS + k * PERIOD_PS
        hc = _host_draws(rngs["host0"])
        hs = _host_draws(rngs["host1"])
        nc = _nic_draws(rngs["nic0"])
        ns = _nic_draws(rngs["nic1"])
        q0 = rngs["switch0"].randrange(2_000_000, 6_000_000)
        q1 = rngs["switch1"].randrange(2_000_000, 6_000_000)

        trace = f"r{k}"
        lab = lambda name: f"r{k}:{name}"
        mmio_id = k * 10 + 1
        dma_rd_id = k * 10 + 2
        dma_wr_id = k * 10 + 3
        pkt_req = k * 2 + 1
        pkt_resp = k * 2 + 2
        buf_rd = _addr(0x80000000, k)
        buf_wr = _addr(0x90000000, k)
        sbuf_wr = _addr(0xA0000000, k)
        sbuf_rd = _addr(0xB0000000, k)

        # ---- client request: syscall, call chain, doorbell ----
        t_sys = t0 + hc["jitter"]
        self._host("host0", t_sys, "cpu0", "SYSCALL num=512 name=ntp_exchange", lab("S"))
        if k == 0:
            t_cfg = t_sys + hc["calls"][0][0] // 2
            self._host("host0", t_cfg, "cpu0", "PCI_CFG reg=0x98", lab("CFG"))
        t_lastcall = self._call_chain("host0", "cpu0", t_sys, hc["calls"], lab("S"))
        t_mmw = t_lastcall + hc["drv"]
        self._host(
            "host0",
            t_mmw,
            "cpu0",
            f"MMIO_W addr=0x{DOORBELL_ADDR:x} size=4 val=0x{hc['val']:x} id={mmio_id}",
            lab("M"),
        )
        t_nmw = t_mmw + hc["pcie"]
        self._nic("nic0", t_nmw, f"mmio write addr=0x{DOORBELL_ADDR:x} size=4 id={mmio_id}", lab("NM"))
        t_nmc = t_nmw + nc["nmmio"]
        self._nic("nic0", t_nmc, f"mmio complete id={mmio_id}", lab("NM"))
        t_mcw = t_nmc + hc["pcie"]
        self._host("host0", t_mcw, "cpu0", f"MMIO_CW id={mmio_id}", lab("M"))
        self._ret_chain("host0", "cpu0", t_mcw, hc["rets"], lab("S"))
        t_ctxsw = t_mcw + hc["ctxgap"]
        self._host("host0", t_ctxsw, "cpu0", f"CTX_SWITCH pid={hc['pid']}", lab("S"))

        # ---- client NIC fetches the payload, transmits ----
        t_di = t_nmc + nc["g1"]
        self._nic(
            "nic0", t_di, f"dma issue read addr=0x{buf_rd:x} size={REQ_LEN} id={dma_rd_id}", lab("ND")
        )
        t_dr = t_di + hc["pcie"]
        self._host("host0", t_dr, "dma0", f"DMA_R addr=0x{buf_rd:x} size={REQ_LEN} id={dma_rd_id}", lab("HD"))
        t_dc = t_dr + hc["dma_first"]
        self._host("host0", t_dc, "dma0", f"DMA_C id={dma_rd_id}", lab("HD"))
        t_ndc = t_dc + hc["pcie"]
        self._nic("nic0", t_ndc, f"dma complete id={dma_rd_id}", lab("ND"))
        t_tx = t_ndc + nc["g2"]
        self._nic("nic0", t_tx, f"tx pkt len={REQ_LEN} hash=0x{nc['tx_hash']:x}", lab("TX"))

        # ---- request through the switches ----
        t_enq0 = t_tx + WIRE_PS
        t_deq0 = t_enq0 + q0
        self._net("switch0", t_enq0, "dev1", "ENQ", pkt_req, REQ_LEN, lab("H0"))
        self._net("switch0", t_deq0, "dev1", "DEQ", pkt_req, REQ_LEN, lab("H0"))
        t_enq1 = t_deq0 + WIRE_PS
        t_deq1 = t_enq1 + q1
        self._net("switch1", t_enq1, "dev1", "ENQ", pkt_req, REQ_LEN, lab("H1"))
        self._net("switch1", t_deq1, "dev1", "DEQ", pkt_req, REQ_LEN, lab("H1"))

        # ---- server NIC receive, DMA deposit, interrupt ----
        t_rx = t_deq1 + WIRE_PS
        self._nic("nic1", t_rx, f"rx pkt len={REQ_LEN} hash=0x{ns['rx_hash']:x}", lab("RX"))
        t_di_s = t_rx + ns["gaprx"]
        self._nic(
            "nic1", t_di_s, f"dma issue write addr=0x{sbuf_wr:x} size={REQ_LEN} id={dma_rd_id}", lab("NDs")
        )
        t_dw_s = t_di_s + hs["pcie"]
        self._host(
            "host1", t_dw_s, "dma0", f"DMA_W addr=0x{sbuf_wr:x} size={REQ_LEN} id={dma_rd_id}", lab("HDs")
        )
        t_dc_s = t_dw_s + hs["dma_first"]
        self._host("host1", t_dc_s, "dma0", f"DMA_C id={dma_rd_id}", lab("HDs"))
        t_ndc_s = t_dc_s + hs["pcie"]
        self._nic("nic1", t_ndc_s, f"dma complete id={dma_rd_id}", lab("NDs"))
        t_msix = t_ndc_s + ns["g3"]
        self._nic("nic1", t_msix, f"msix issue vec={MSIX_VEC}", lab("RX"))
        t_mx_s = t_msix + hs["pcie"]
        self._host("host1", t_mx_s, "cpu0", f"MSIX vec={MSIX_VEC}", lab("IS"))
        self._host("host1", t_mx_s + hs["intr"] // 3, "cpu0", f"INT_POST vec={MSIX_VEC}", lab("IS"))
        t_iclr_s = t_mx_s + hs["intr"]
        self._host("host1", t_iclr_s, "cpu0", f"INT_CLEAR vec={MSIX_VEC}", lab("IS"))

        # ---- server syscall builds and sends the reply ----
        t_sys_s = t_iclr_s + hs["wake"]
        self._host("host1", t_sys_s, "cpu0", "SYSCALL num=513 name=ntp_respond", lab("S2"))
        t_lastcall_s = self._call_chain("host1", "cpu0", t_sys_s, hs["calls"], lab("S2"))
        t_mmw_s = t_lastcall_s + hs["drv"]
        self._host(
            "host1",
            t_mmw_s,
            "cpu0",
            f"MMIO_W addr=0x{DOORBELL_ADDR:x} size=4 val=0x{hs['val']:x} id={mmio_id}",
            lab("M2"),
        )
        t_nmw_s = t_mmw_s + hs["pcie"]
        self._nic("nic1", t_nmw_s, f"mmio write addr=0x{DOORBELL_ADDR:x} size=4 id={mmio_id}", lab("NM2"))
        t_nmc_s = t_nmw_s + ns["nmmio"]
        self._nic("nic1", t_nmc_s, f"mmio complete id={mmio_id}", lab("NM2"))
        t_mcw_s = t_nmc_s + hs["pcie"]
        self._host("host1", t_mcw_s, "cpu0", f"MMIO_CW id={mmio_id}", lab("M2"))
        self._ret_chain("host1", "cpu0", t_mcw_s, hs["rets"], lab("S2"))
        self._host(
            "host1", t_mcw_s + (hs["done"] * 3) // 4, "cpu0", f"CTX_SWITCH pid={hs['pid']}", lab("S2")
        )
        t_sret_s = t_mcw_s + hs["done"]
        self._host("host1", t_sret_s, "cpu0", f"SYSRET num=513 ret={REQ_LEN}", lab("S2"))

        # ---- response DMA and transmit on the server NIC ----
        t_di2 = t_nmc_s + ns["g1"]
        self._nic(
            "nic1", t_di2, f"dma issue read addr=0x{sbuf_rd:x} size={REQ_LEN} id={dma_wr_id}", lab("ND2")
        )
        t_dr2 = t_di2 + hs["pcie"]
        self._host(
            "host1", t_dr2, "dma0", f"DMA_R addr=0x{sbuf_rd:x} size={REQ_LEN} id={dma_wr_id}", lab("HD2")
        )
        t_dc2 = t_dr2 + hs["dma_second"]
        self._host("host1", t_dc2, "dma0", f"DMA_C id={dma_wr_id}", lab("HD2"))
        t_ndc2 = t_dc2 + hs["pcie"]
        self._nic("nic1", t_ndc2, f"dma complete id={dma_wr_id}", lab("ND2"))
        t_tx2 = t_ndc2 + ns["g2"]
        self._nic("nic1", t_tx2, f"tx pkt len={REQ_LEN} hash=0x{ns['tx_hash']:x}", lab("TX2"))

        # ---- response through the switches (switch0 inflated under load) ----
        t_enq1r = t_tx2 + WIRE_PS
        t_deq1r = t_enq1r + q1
        self._net("switch1", t_enq1r, "dev0", "ENQ", pkt_resp, REQ_LEN, lab("H1R"))
        self._net("switch1", t_deq1r, "dev0", "DEQ", pkt_resp, REQ_LEN, lab("H1R"))
        t_enq0r = t_deq1r + WIRE_PS
        t_deq0r = t_enq0r + q0 + dq_ps
        self._net("switch0", t_enq0r, "dev0", "ENQ", pkt_resp, REQ_LEN, lab("H0R"))
        self._net("switch0", t_deq0r, "dev0", "DEQ", pkt_resp, REQ_LEN, lab("H0R"))

        # ---- client NIC receive, deposit, interrupt ----
        t_rx2 = t_deq0r + WIRE_PS
        self._nic("nic0", t_rx2, f"rx pkt len={REQ_LEN} hash=0x{nc['rx_hash']:x}", lab("RX2"))
        t_di2c = t_rx2 + nc["gaprx"]
        self._nic(
            "nic0", t_di2c, f"dma issue write addr=0x{buf_wr:x} size={REQ_LEN} id={dma_wr_id}", lab("ND2C")
        )
        t_dw2 = t_di2c + hc["pcie"]
        self._host(
            "host0", t_dw2, "dma0", f"DMA_W addr=0x{buf_wr:x} size={REQ_LEN} id={dma_wr_id}", lab("HD2C")
        )
        t_dc2c = t_dw2 + hc["dma_second"]
        self._host("host0", t_dc2c, "dma0", f"DMA_C id={dma_wr_id}", lab("HD2C"))
        t_ndc2c = t_dc2c + hc["pcie"]
        self._nic("nic0", t_ndc2c, f"dma complete id={dma_wr_id}", lab("ND2C"))
        t_msix2 = t_ndc2c + nc["g3"]
        self._nic("nic0", t_msix2, f"msix issue vec={MSIX_VEC}", lab("RX2"))
        t_mx_c = t_msix2 + hc["pcie"]
        self._host("host0", t_mx_c, "cpu0", f"MSIX vec={MSIX_VEC}", lab("IC"))
        self._host("host0", t_mx_c + hc["intr"] // 3, "cpu0", f"INT_POST vec={MSIX_VEC}", lab("IC"))
        t_iclr_c = t_mx_c + hc["intr"]
        self._host("host0", t_iclr_c, "cpu0", f"INT_CLEAR vec={MSIX_VEC}", lab("IC"))

        # ---- client wakes: return from the blocking syscall, adjust clock ----
        t_sret = t_iclr_c + hc["ret_gap"]
        self._host("host0", t_sret, "cpu0", "SYSRET num=512 ret=0", lab("S"))
        t_adj = t_iclr_c + hc["adj_off"]
        self._host("host0", t_adj, "cpu1", "SYSCALL num=159 name=adjtimex", lab("A"))
        t_adj_r = t_adj + hc["adj_dur"]
        self._host("host0", t_adj_r, "cpu1", "SYSRET num=159 ret=0", lab("A"))

        # ---- truth spans ----
        self._span(lab("S"), "host0", "HostSyscall", t_sys, t_sret, None, trace)
        if k == 0:
            self._span(lab("CFG"), "host0", "HostPciConfig", t_cfg, t_cfg, lab("S"), trace)
        self._span(lab("M"), "host0", "HostMmio", t_mmw, t_mcw, lab("S"), trace)
        self._span(lab("NM"), "nic0", "NicMmioSpan", t_nmw, t_nmc, lab("M"), trace)
        self._span(lab("ND"), "nic0", "NicDmaSpan", t_di, t_ndc, lab("NM"), trace)
        self._span(lab("HD"), "host0", "HostDma", t_dr, t_dc, lab("ND"), trace)
        self._span(lab("TX"), "nic0", "NicTxSpan", t_tx, t_tx, lab("ND"), trace)
        self._span(lab("H0"), "switch0", "NetHop", t_enq0, t_deq0, lab("TX"), trace)
        self._span(lab("H1"), "switch1", "NetHop", t_enq1, t_deq1, lab("H0"), trace)
        self._span(lab("RX"), "nic1", "NicRxSpan", t_rx, t_msix, lab("H1"), trace)
        self._span(lab("NDs"), "nic1", "NicDmaSpan", t_di_s, t_ndc_s, lab("RX"), trace)
        self._span(lab("HDs"), "host1", "HostDma", t_dw_s, t_dc_s, lab("NDs"), trace)
        self._span(lab("IS"), "host1", "HostInterrupt", t_mx_s, t_iclr_s, lab("RX"), trace)
        self._span(lab("S2"), "host1", "HostSyscall", t_sys_s, t_sret_s, lab("IS"), trace)
        self._span(lab("M2"), "host1", "HostMmio", t_mmw_s, t_mcw_s, lab("S2"), trace)
        self._span(lab("NM2"), "nic1", "NicMmioSpan", t_nmw_s, t_nmc_s, lab("M2"), trace)
        self._span(lab("ND2"), "nic1", "NicDmaSpan", t_di2, t_ndc2, lab("NM2"), trace)
        self._span(lab("HD2"), "host1", "HostDma", t_dr2, t_dc2, lab("ND2"), trace)
        self._span(lab("TX2"), "nic1", "NicTxSpan", t_tx2, t_tx2, lab("ND2"), trace)
        self._span(lab("H1R"), "switch1", "NetHop", t_enq1r, t_deq1r, lab("TX2"), trace)
        self._span(lab("H0R"), "switch0", "NetHop", t_enq0r, t_deq0r, lab("H1R"), trace)
        self._span(lab("RX2"), "nic0", "NicRxSpan", t_rx2, t_msix2, lab("H0R"), trace)
        self._span(lab("ND2C"), "nic0", "NicDmaSpan", t_di2c, t_ndc2c, lab("RX2"), trace)
        self._span(lab("HD2C"), "host0", "HostDma", t_dw2, t_dc2c, lab("ND2C"), trace)
        self._span(lab("IC"), "host0", "HostInterrupt", t_mx_c, t_iclr_c, lab("RX2"), trace)
        self._span(lab("A"), "host0", "HostSyscall", t_adj, t_adj_r, lab("IC"), trace)
        self.records.append({"type": "trace", "label": trace, "category": "request", "request": k})

        # ---- truth dwell bookkeeping (self-times, root excluded) ----
        frames_sum_s = sum(g for g, *_ in hs["calls"])
        request_dwell = [
            ("host0", 2 * hc["pcie"] + hc["dma_first"]),
            ("nic0", nc["nmmio"] + 2 * hc["pcie"]),
            ("switch0", q0),
            ("switch1", q1),
            ("nic1", ns["gaprx"] + ns["g3"] + 2 * hs["pcie"]),
            ("host1", hs["dma_first"] + hs["intr"]),
        ]
        response_dwell = [
            ("host1", frames_sum_s + hs["drv"] + hs["done"] + 2 * hs["pcie"] + hs["dma_second"]),
            ("nic1", ns["nmmio"] + 2 * hs["pcie"]),
            ("switch1", q1),
            ("switch0", q0 + dq_ps),
            ("nic0", nc["gaprx"] + nc["g3"] + 2 * hc["pcie"]),
            ("host0", hc["dma_second"] + hc["intr"] + hc["adj_dur"]),
        ]
        for cid, ps in request_dwell:
            self.records.append(
                {"type": "dwell", "request": k, "path": "request", "component": cid, "ps": ps}
            )
        for cid, ps in response_dwell:
            self.records.append(
                {"type": "dwell", "request": k, "path": "response", "component": cid, "ps": ps}
            )
        root_ps = t_sret - t_sys
        total = sum(ps for _, ps in request_dwell) + sum(ps for _, ps in response_dwell)
        self.records.append(
            {"type": "rtt", "request": k, "root_ps": root_ps, "remainder_ps": root_ps - total}
        )
        if dq_ps:
            self.records.append(
                {"type": "delay", "request": k, "node": "switch0", "pkt": pkt_resp, "ps": dq_ps}
            )

        # ---- background packets: bgsrc0 -> switch1 -> switch0 -> bgsink0 ----
        if scenario == "rpc_background":
            bg = rngs["bg"]
            for j in range(BG_PER_CYCLE):
                pkt = 1_000_000 + k * BG_PER_CYCLE + j
                t_b = t0 + bg.randrange(0, 800_000_000)
                qb1 = bg.randrange(1_000_000, 8_000_000)
                qb0 = bg.randrange(1_000_000, 8_000_000)
                btrace = f"b{k}:{j}"
                l1, l0 = f"{btrace}:h1", f"{btrace}:h0"
                self._net("switch1", t_b, "dev0", "ENQ", pkt, BG_LEN, l1)
                self._net("switch1", t_b + qb1, "dev0", "DEQ", pkt, BG_LEN, l1)
                t_b0 = t_b + qb1 + WIRE_PS
                self._net("switch0", t_b0, "dev2", "ENQ", pkt, BG_LEN, l0)
                self._net("switch0", t_b0 + qb0, "dev2", "DEQ", pkt, BG_LEN, l0)
                self._span(l1, "switch1", "NetHop", t_b, t_b + qb1, None, btrace)
                self._span(l0, "switch0", "NetHop", t_b0, t_b0 + qb0, l1, btrace)
                self.records.append(
                    {"type": "trace", "label": btrace, "category": "background", "request": k}
                )

        for rows in self.rows.values():
            rows.sort(key=lambda r: r[0])
            last = rows[-1][0] if rows else t0
            if last >= t0 + PERIOD_PS:
                raise AssertionError(f"cycle {k} overruns its slot by {last - t0 - PERIOD_PS} ps")


# ---------------------------------------------------------------------------
# file emission


_BANNERS = {
    "host": ("# host-sim trace v1 id={cid} cpus=2 dma=1", "# clock=ps"),
    "nic": ("# nic-sim trace v1 id={cid} model=i40e", "# clock=ps"),
    "net": ("# net-sim queue trace v1 node={cid}", "# clock=s"),
}

_DIALECT_OF = {"host": "host", "nic": "nic", "network": "net"}


def default_config(exporter_path: str = "trace.json", exporter_format: str = "jaeger") -> dict:
    """Wiring for the generated topology; paths relative to the config file."""
    return {
        "components": [{"id": cid, "type": ctype} for cid, ctype in TOPOLOGY],
        "sources": [
            {"component": cid, "path": f"{cid}.log", "dialect": _DIALECT_OF[ctype]}
            for cid, ctype in TOPOLOGY
        ],
        "channels": [
            {"a": "host0", "b": "nic0", "boundary": "pcie"},
            {"a": "host1", "b": "nic1", "boundary": "pcie"},
            {"a": "nic0", "b": "switch0", "boundary": "eth"},
            {"a": "switch0", "b": "switch1", "boundary": "eth"},
            {"a": "switch1", "b": "nic1", "boundary": "eth"},
        ],
        "ports": {
            "switch0": {"dev0": "nic0", "dev1": "switch1", "dev2": "bgsink0"},
            "switch1": {"dev0": "switch0", "dev1": "nic1", "dev2": "bgsrc0"},
        },
        "routes": [
            {"hops": ["host0", "nic0", "switch0", "switch1", "nic1", "host1"]},
            {"hops": ["host1", "nic1", "switch1", "switch0", "nic0", "host0"]},
            {"hops": ["bgsrc0", "switch1", "switch0", "bgsink0"]},
        ],
        "actors": {
            "host0": [{"kind": "resolve_symbols", "map": "syms.txt"}],
            "host1": [{"kind": "resolve_symbols", "map": "syms.txt"}],
        },
        "exporter": {"format": exporter_format, "path": exporter_path},
        "mode": "offline",
    }


def generate(scenario: str, seed: int, n: int, out_dir: str, dq_us: int = 50) -> GenResult:
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: expected one of {', '.join(SCENARIOS)}, got {scenario!r}")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed: expected non-negative integer, got {seed!r}")
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ConfigError(f"n_requests: expected non-negative integer, got {n!r}")
    if not isinstance(dq_us, int) or isinstance(dq_us, bool) or not 0 <= dq_us <= MAX_DQ_US:
        raise ConfigError(f"dq_us: expected integer in [0, {MAX_DQ_US}], got {dq_us!r}")
    dq_ps = dq_us * PS_PER_US if scenario == "rpc_background" else 0

    os.makedirs(out_dir, exist_ok=True)
    rngs = {cid: _stream_rng(seed, cid) for cid, _ in TOPOLOGY}
    rngs["bg"] = _stream_rng(seed, "bg")

    tmp_suffix = f".tmp.{os.getpid()}"
    paths = {cid: os.path.join(out_dir, f"{cid}.log") for cid, _ in TOPOLOGY}
    truth_path = os.path.join(out_dir, "truth.jsonl")
    config_path = os.path.join(out_dir, "config.json")
    syms_path = os.path.join(out_dir, "syms.txt")

    handles = {}
    counts = {cid: 0 for cid, _ in TOPOLOGY}
    try:
        for (cid, ctype) in TOPOLOGY:
            fh = open(paths[cid] + tmp_suffix, "w", encoding="utf-8")
            handles[cid] = fh
            for banner in _BANNERS[_DIALECT_OF[ctype]]:
                fh.write(banner.format(cid=cid) + "\n")
        truth = open(truth_path + tmp_suffix, "w", encoding="utf-8")
        handles["__truth__"] = truth
        truth.write('{"spanweave_truth":1}\n')
        meta = {
            "type": "meta",
            "scenario": scenario,
            "seed": seed,
            "n_requests": n,
            "dq_us": dq_us if scenario == "rpc_background" else 0,
            "components": [cid for cid, _ in TOPOLOGY],
        }
        truth.write(json.dumps(meta, separators=(",", ":")) + "\n")

        for k in range(n):
            cycle = _Cycle(k, scenario, rngs, dq_ps)
            for cid, _ in TOPOLOGY:
                fh = handles[cid]
                for ts, line, label in cycle.rows[cid]:
                    fh.write(line + "\n")
                    if label is not None:
                        cycle.span_events[label].append([cid, counts[cid]])
                    counts[cid] += 1
            for rec in cycle.records:
                if rec["type"] == "span":
                    rec = dict(rec)
                    rec["events"] = cycle.span_events[rec["label"]]
                truth.write(json.dumps(rec, separators=(",", ":")) + "\n")

        for name, fh in handles.items():
            fh.close()
        handles.clear()
        for cid in paths:
            os.replace(paths[cid] + tmp_suffix, paths[cid])
        os.replace(truth_path + tmp_suffix, truth_path)
    except OSError as exc:
        for fh in handles.values():
            fh.close()
        raise IoError(f"cannot write scenario files in {out_dir}: {exc}") from exc

    with open(syms_path + tmp_suffix, "w", encoding="utf-8") as fh:
        fh.write("# text symbols (sorted)\n")
        for addr, name in _symbol_table():
            fh.write(f"0x{addr:x} {name}\n")
    os.replace(syms_path + tmp_suffix, syms_path)

    with open(config_path + tmp_suffix, "w", encoding="utf-8") as fh:
        json.dump(default_config(), fh, indent=2)
        fh.write("\n")
    os.replace(config_path + tmp_suffix, config_path)

    return GenResult(
        out_dir=out_dir,
        logs=paths,
        truth_path=truth_path,
        config_path=config_path,
        syms_path=syms_path,
        events=counts,
        requests=n,
    )


# ---------------------------------------------------------------------------
# corruption fixtures


def corrupt(path: str, dialect: str, component_id: str, mode: str, p: float, seed: int) -> list[int]:
    """Deterministically drop or garble a fraction of parseable event lines.

    Returns 1-based line numbers affected. Garbling rewrites the first
    key=value of the line to key=zz, which no event grammar accepts, so each
    garbled line becomes exactly one ParseError.
    """
    if mode not in ("drop", "garble"):
        raise ValueError(f"corrupt mode must be drop|garble, got {mode!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"corrupt fraction must be in [0, 1], got {p!r}")
    parse = dialect_parser(dialect)
    ctype = {"host": ComponentType.HOST, "nic": ComponentType.NIC, "net": ComponentType.NETWORK}[
        dialect
    ]
    component = ComponentRef(component_id, ctype)
    rng = _stream_rng(seed, f"corrupt|{os.path.basename(path)}")
    affected: list[int] = []
    out_lines: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if isinstance(parse(line, component, line_no), Event) and rng.random() < p:
                affected.append(line_no)
                if mode == "drop":
                    continue
                out_lines.append(_garble(line))
            else:
                out_lines.append(line)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        for line in out_lines:
            fh.write(line + "\n")
    os.replace(tmp, path)
    return affected


def _garble(line: str) -> str:
    tokens = line.split(" ")
    for i, tok in enumerate(tokens):
        key, eq, _ = tok.partition("=")
        if eq:
            tokens[i] = f"{key}=zz"
            break
    return " ".join(tokens)


# ---------------------------------------------------------------------------
# truth loading and comparison


@dataclass(slots=True)
class Truth:
    meta: dict = field(default_factory=dict)
    spans: list = field(default_factory=list)  # span records
    traces: dict = field(default_factory=dict)  # label -> record
    dwells: list = field(default_factory=list)
    rtts: list = field(default_factory=list)


def load_truth(path: str) -> Truth:
    truth = Truth()
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header != {"spanweave_truth": 1}:
            raise IoError(f"{path}: missing spanweave_truth header")
        for line in fh:
            rec = json.loads(line)
            rtype = rec.get("type")
            if rtype == "meta":
                truth.meta = rec
            elif rtype == "span":
                truth.spans.append(rec)
            elif rtype == "trace":
                truth.traces[rec["label"]] = rec
            elif rtype == "dwell":
                truth.dwells.append(rec)
            elif rtype == "rtt":
                truth.rtts.append(rec)
    return truth


def _span_signature(component: str, kind: str, start: int, end: int, events) -> tuple:
    return (component, kind, start, end, frozenset(tuple(e) for e in events))


def verify_run(truth: Truth, spans: list) -> list[str]:
    """Compare reconstructed spans against ground truth.

    Spans match on (component, kind, interval, event set); parent edges and
    trace partitions must then agree through that matching. Returns a list of
    mismatch descriptions, empty when reconstruction is exact.
    """
    problems: list[str] = []

    expected: dict[tuple, dict] = {}
    for rec in truth.spans:
        sig = _span_signature(
            rec["component"], rec["kind"], rec["start_ts"], rec["end_ts"], rec["events"]
        )
        if sig in expected:
            problems.append(f"truth has duplicate span signature {sig[:4]}")
        expected[sig] = rec

    actual: dict[tuple, object] = {}
    for span in spans:
        sig = _span_signature(
            span.component.id,
            span.kind.value,
            span.start_ts,
            span.end_ts,
            [[span.component.id, e.seq] for e in span.events],
        )
        if sig in actual:
            problems.append(f"reconstruction emitted duplicate span {sig[:4]}")
        actual[sig] = span

    for sig, rec in expected.items():
        if sig not in actual:
            problems.append(f"missing span {rec['label']} {sig[:4]}")
    for sig, span in actual.items():
        if sig not in expected:
            problems.append(f"unexpected span {span.kind.value} {sig[:4]}")
    if problems:
        return problems

    by_label = {rec["label"]: rec for rec in truth.spans}
    span_of_label = {rec["label"]: actual[sig] for sig, rec in expected.items()}

    for rec in truth.spans:
        span = span_of_label[rec["label"]]
        parent_label = rec["parent"]
        if parent_label is None:
            if span.parent_span_id is not None:
                problems.append(f"span {rec['label']} should be a root")
        else:
            parent_span = span_of_label.get(parent_label)
            if parent_span is None or span.parent_span_id != parent_span.span_id:
                problems.append(f"span {rec['label']} has wrong parent")

    trace_ids: dict[str, set] = {}
    for rec in truth.spans:
        trace_ids.setdefault(rec["trace"], set()).add(span_of_label[rec["label"]].trace_id)
    for label, ids in trace_ids.items():
        if len(ids) != 1:
            problems.append(f"trace {label} split across {len(ids)} reconstructed traces")
    seen: dict[str, str] = {}
    for label, ids in trace_ids.items():
        tid = next(iter(ids))
        if tid in seen:
            problems.append(f"traces {seen[tid]} and {label} merged")
        seen[tid] = label
    return problems
