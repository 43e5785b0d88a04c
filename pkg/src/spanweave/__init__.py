"""spanweave: reconstruct distributed traces from modular simulator logs.

Per-component logs (host, NIC, network dialects) are parsed into typed event
streams, woven into spans with cross-component context propagation over
watermarked channels, and exported as Jaeger JSON or JSONL for analysis.
"""

from .model import (
    ComponentRef,
    ComponentType,
    Event,
    EventKind,
    Span,
    SpanKind,
    SpanweaveError,
    TraceContext,
    event_kinds,
    span_kinds,
)
from .parsers import IoError, LogSource, ParseError, StreamError, open_stream, parse_all
from .weaver import HostWeaver, NetWeaver, NicWeaver, UnknownDeviceError
from .exporter import SpanCollector, jaeger_bytes, jsonl_bytes, load_jsonl, write_export
from .pipeline import ContractViolation, RunStats, WindowInverted
from .wiring import ConfigError, WiringConfig, build_and_run, load_config, parse_config
from .analysis import Aggregate, Breakdown, IncompleteTrace, TraceNotFound
from .simgen import GenResult, corrupt, generate, load_truth, verify_run

__version__ = "0.1.0"

__all__ = [
    "Aggregate",
    "Breakdown",
    "ComponentRef",
    "ComponentType",
    "ConfigError",
    "ContractViolation",
    "Event",
    "EventKind",
    "GenResult",
    "HostWeaver",
    "IncompleteTrace",
    "IoError",
    "LogSource",
    "NetWeaver",
    "NicWeaver",
    "ParseError",
    "RunStats",
    "Span",
    "SpanCollector",
    "SpanKind",
    "SpanweaveError",
    "StreamError",
    "TraceContext",
    "TraceNotFound",
    "UnknownDeviceError",
    "WindowInverted",
    "WiringConfig",
    "build_and_run",
    "corrupt",
    "event_kinds",
    "generate",
    "jaeger_bytes",
    "jsonl_bytes",
    "load_jsonl",
    "load_config",
    "load_truth",
    "open_stream",
    "parse_all",
    "parse_config",
    "span_kinds",
    "verify_run",
    "write_export",
    "__version__",
]
