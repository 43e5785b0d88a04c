"""Pipelines: producers, actors and weaver consumers over bounded queues.

Each log source gets a linear chain producer -> actors -> weaver. The whole
graph runs either cooperatively on one thread (round-robin over ready
stages) or with one thread per stage; both produce byte-identical exports
because matching decisions depend only on watermarks and content-derived
ids, never on scheduling order.

Queues are bounded so memory stays independent of input size; a full queue
blocks the upstream stage. Deadlock is impossible for inputs satisfying the
watermark contract, so a stall watchdog reports ContractViolation instead of
hanging forever.
"""

from __future__ import annotations

import bisect
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .model import Event, EventKind, SpanweaveError
from .parsers import EventStream, IoError, StreamError
from .weaver import Weaver

DEFAULT_QUEUE_CAPACITY = 4096
_CHUNK = 128
_COOP_BATCH = 256
_STALL_SECONDS = 5.0


class ContractViolation(SpanweaveError):
    pass


class WindowInverted(SpanweaveError):
    pass


# ---------------------------------------------------------------------------
# actors


def actor_filter_kinds(keep: set[EventKind]):
    def actor(event: Event) -> Event | None:
        return event if event.kind in keep else None

    return actor


class SymbolMap:
    """nm-style address table with nearest-lower-bound lookup."""

    def __init__(self, entries: list[tuple[int, str]]):
        addrs = [a for a, _ in entries]
        if any(b <= a for a, b in zip(addrs, addrs[1:])):
            raise ValueError("symbol map addresses must be strictly increasing")
        self._addrs = addrs
        self._names = [n for _, n in entries]

    @classmethod
    def from_file(cls, path: str) -> "SymbolMap":
        entries = []
        try:
            with open(path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    parts = line.split()
                    if len(parts) != 2 or not parts[0].startswith("0x"):
                        raise ValueError(f"{path}:{line_no}: expected '0x<hex> <name>'")
                    entries.append((int(parts[0], 16), parts[1]))
        except OSError as exc:
            raise IoError(f"cannot read symbol map {path}: {exc}") from exc
        return cls(entries)

    def resolve(self, addr: int) -> str | None:
        i = bisect.bisect_right(self._addrs, addr)
        if i == 0:
            return None
        return self._names[i - 1]


def actor_resolve_symbols(symbols: SymbolMap):
    def actor(event: Event) -> Event:
        if event.kind is EventKind.HostCall:
            target = event.attrs["target"]
            name = symbols.resolve(target)
            if name is None:
                event.attrs["fn"] = f"0x{target:x}"
                event.attrs["fn_unresolved"] = True
            else:
                event.attrs["fn"] = name
        return event

    return actor


def actor_time_window(lo: int, hi: int):
    if lo > hi:
        raise WindowInverted(f"time window [{lo}, {hi}] is inverted")

    def actor(event: Event) -> Event | None:
        return event if lo <= event.ts <= hi else None

    return actor


# ---------------------------------------------------------------------------
# queues


class CoopQueue:
    """SPSC event queue for the cooperative scheduler."""

    __slots__ = ("capacity", "items", "closed", "peak")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: deque[Event] = deque()
        self.closed = False
        self.peak = 0

    def put(self, event: Event) -> bool:
        if len(self.items) >= self.capacity:
            return False
        self.items.append(event)
        if len(self.items) > self.peak:
            self.peak = len(self.items)
        return True

    def peek(self) -> Event | None:
        return self.items[0] if self.items else None

    def pop(self) -> Event:
        return self.items.popleft()

    def close(self) -> None:
        self.closed = True

    def drained(self) -> bool:
        return self.closed and not self.items


class ThreadedQueue:
    """Bounded chunked queue for the threaded scheduler."""

    def __init__(self, capacity: int, abort: threading.Event):
        self._q: queue.Queue = queue.Queue(maxsize=max(1, capacity // _CHUNK))
        self._abort = abort
        self._buf: list[Event] = []
        self._lock = threading.Lock()
        self._occupancy = 0
        self.peak = 0

    def put(self, event: Event) -> None:
        self._buf.append(event)
        if len(self._buf) >= _CHUNK:
            self._flush()

    def _flush(self) -> None:
        if not self._buf:
            return
        chunk = self._buf
        self._buf = []
        with self._lock:
            self._occupancy += len(chunk)
            if self._occupancy > self.peak:
                self.peak = self._occupancy
        self._put_raw(chunk)

    def _put_raw(self, item) -> None:
        while True:
            try:
                self._q.put(item, timeout=0.2)
                return
            except queue.Full:
                if self._abort.is_set():
                    raise _Aborted()

    def close(self) -> None:
        self._flush()
        self._put_raw(None)

    def chunks(self):
        while True:
            try:
                chunk = self._q.get(timeout=0.2)
            except queue.Empty:
                if self._abort.is_set():
                    raise _Aborted()
                continue
            if chunk is None:
                return
            with self._lock:
                self._occupancy -= len(chunk)
            yield chunk


class _Aborted(Exception):
    """Internal: another stage failed, unwind quietly."""


# ---------------------------------------------------------------------------
# stages (cooperative forms)


class ProducerStage:
    def __init__(self, stream: EventStream, out: CoopQueue):
        self.stream = stream
        self.component = stream.source.component
        self.out = out
        self._it = None
        self.done = False
        self._pending: Event | None = None

    def step(self) -> bool:
        if self.done:
            return False
        if self._it is None:
            self._it = iter(self.stream)
        progressed = False
        for _ in range(_COOP_BATCH):
            event = self._pending
            self._pending = None
            if event is None:
                try:
                    event = next(self._it)
                except StopIteration:
                    self.out.close()
                    self.done = True
                    return True
            if not self.out.put(event):
                self._pending = event
                break
            progressed = True
        return progressed


class ActorStage:
    def __init__(self, actor, inq: CoopQueue, out: CoopQueue, component):
        self.actor = actor
        self.inq = inq
        self.out = out
        self.component = component
        self.done = False

    def step(self) -> bool:
        if self.done:
            return False
        progressed = False
        for _ in range(_COOP_BATCH):
            event = self.inq.peek()
            if event is None:
                if self.inq.drained():
                    self.out.close()
                    self.done = True
                    return True
                break
            result = self.actor(event)
            if result is not None and not self.out.put(result):
                break
            self.inq.pop()
            progressed = True
        return progressed


class WeaverStage:
    def __init__(self, weaver: Weaver, inq: CoopQueue):
        self.weaver = weaver
        self.inq = inq
        self.component = weaver.component
        self.done = False

    def step(self) -> bool:
        if self.done:
            return False
        weaver = self.weaver
        progressed = False
        for _ in range(_COOP_BATCH):
            event = self.inq.peek()
            if event is None:
                if self.inq.drained():
                    weaver.finish()
                    self.done = True
                    return True
                break
            if weaver.advertise(event.ts):
                progressed = True
            if not weaver.may_process(event.ts):
                break
            self.inq.pop()
            weaver.process(event)
            progressed = True
        return progressed


def run_cooperative(stages: list) -> None:
    while True:
        progressed = False
        alldone = True
        for stage in stages:
            if stage.done:
                continue
            alldone = False
            if stage.step():
                progressed = True
        if alldone:
            return
        if not progressed:
            stuck = ", ".join(
                f"{s.component.id}:{type(s).__name__}" for s in stages if not s.done
            )
            raise ContractViolation(f"no stage can make progress; stuck: {stuck}")


# ---------------------------------------------------------------------------
# threaded scheduler


class _Shared:
    def __init__(self):
        self.abort = threading.Event()
        self.cond = threading.Condition()
        self.progress = 0
        self.errors: list[BaseException] = []

    def fail(self, exc: BaseException) -> None:
        with self.cond:
            if not isinstance(exc, _Aborted):
                self.errors.append(exc)
            self.abort.set()
            self.cond.notify_all()


def _producer_main(stream: EventStream, out: ThreadedQueue, shared: _Shared) -> None:
    try:
        for event in stream:
            if shared.abort.is_set():
                raise _Aborted()
            out.put(event)
        out.close()
    except BaseException as exc:
        shared.fail(exc)


def _actor_main(actor, inq: ThreadedQueue, out: ThreadedQueue, shared: _Shared) -> None:
    try:
        for chunk in inq.chunks():
            for event in chunk:
                result = actor(event)
                if result is not None:
                    out.put(result)
        out.close()
    except BaseException as exc:
        shared.fail(exc)


def _weaver_main(weaver: Weaver, inq: ThreadedQueue, shared: _Shared) -> None:
    cond = shared.cond
    try:
        for chunk in inq.chunks():
            for event in chunk:
                with cond:
                    if weaver.advertise(event.ts):
                        cond.notify_all()
                    deadline = time.monotonic() + _STALL_SECONDS
                    while not weaver.may_process(event.ts):
                        if shared.abort.is_set():
                            raise _Aborted()
                        snapshot = shared.progress
                        cond.wait(timeout=0.5)
                        if shared.progress != snapshot:
                            deadline = time.monotonic() + _STALL_SECONDS
                        elif time.monotonic() > deadline:
                            raise ContractViolation(
                                f"{weaver.component.id}: watermark stall at ts {event.ts}"
                            )
                    weaver.process(event)
                    shared.progress += 1
                    cond.notify_all()
        with cond:
            weaver.finish()
            shared.progress += 1
            cond.notify_all()
    except BaseException as exc:
        shared.fail(exc)


def run_threaded(pipelines: list[tuple[EventStream, list, Weaver]], capacity: int) -> list:
    """Each pipeline is (stream, actors, weaver); returns queue peak list."""
    shared = _Shared()
    threads = []
    queues = []
    for stream, actors, weaver in pipelines:
        q = ThreadedQueue(capacity, shared.abort)
        queues.append(q)
        threads.append(threading.Thread(target=_producer_main, args=(stream, q, shared)))
        for actor in actors:
            nq = ThreadedQueue(capacity, shared.abort)
            queues.append(nq)
            threads.append(threading.Thread(target=_actor_main, args=(actor, q, nq, shared)))
            q = nq
        threads.append(threading.Thread(target=_weaver_main, args=(weaver, q, shared)))
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if shared.errors:
        raise shared.errors[0]
    return [q.peak for q in queues]


# ---------------------------------------------------------------------------
# stats


@dataclass(slots=True)
class RunStats:
    events: int = 0
    skipped: int = 0
    parse_errors: int = 0
    spans: int = 0
    traces: int = 0
    contexts_matched: int = 0
    contexts_unmatched: int = 0
    unmatched_completions: int = 0
    key_mismatches: int = 0
    truncated_spans: int = 0
    orphan_events: int = 0
    queue_peak: int = 0
    mode: str = "single"
    export_bytes: int = 0
    components: dict = field(default_factory=dict)
    error_samples: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "events": self.events,
            "skipped": self.skipped,
            "parse_errors": self.parse_errors,
            "spans": self.spans,
            "traces": self.traces,
            "contexts_matched": self.contexts_matched,
            "contexts_unmatched": self.contexts_unmatched,
            "unmatched_completions": self.unmatched_completions,
            "key_mismatches": self.key_mismatches,
            "truncated_spans": self.truncated_spans,
            "orphan_events": self.orphan_events,
            "queue_peak": self.queue_peak,
            "mode": self.mode,
            "export_bytes": self.export_bytes,
            "components": {k: self.components[k] for k in sorted(self.components)},
            "error_samples": list(self.error_samples),
            "summary": self.summary,
        }


def collect_stats(streams: list[EventStream], weavers: list[Weaver]) -> RunStats:
    stats = RunStats()
    for stream in streams:
        c = stream.counters
        stats.events += c.events
        stats.skipped += c.skipped
        stats.parse_errors += c.parse_errors
        stats.error_samples.extend(
            f"{stream.source.component.id}:{e.line_no}: {e.reason}" for e in c.error_samples
        )
        entry = stats.components.setdefault(stream.source.component.id, {})
        entry.update(events=c.events, skipped=c.skipped, parse_errors=c.parse_errors)
    for weaver in weavers:
        c = weaver.counters
        stats.spans += c.spans
        stats.contexts_matched += c.contexts_matched
        stats.contexts_unmatched += c.contexts_unmatched
        stats.unmatched_completions += c.unmatched_completions
        stats.key_mismatches += c.key_mismatches
        stats.truncated_spans += c.truncated_spans
        stats.orphan_events += c.orphan_events
        entry = stats.components.setdefault(weaver.component.id, {})
        entry.update(spans=c.spans, peak_open_spans=weaver.peak_open)
    stats.error_samples = stats.error_samples[:16]
    return stats
