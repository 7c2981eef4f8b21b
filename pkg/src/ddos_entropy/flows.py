"""
Flow records, destination flow keys and fixed-duration time windows.

Records are flow-level aggregates: each one carries a packet count so that
packet-weighted and flow-weighted distributions can both be built from the
same trace. Addresses are held as 32-bit integers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

from .errors import ConfigError, OrderingError, ParseError

FIELDS = (
    "timestamp",
    "src_addr",
    "dst_addr",
    "src_port",
    "dst_port",
    "protocol",
    "packet_count",
    "byte_count",
)
CSV_HEADER = ",".join(FIELDS)


def ip_to_int(text: str) -> int:
    """Parse a dotted-quad IPv4 address strictly (exactly four decimal octets)."""
    parts = text.split(".")
    if len(parts) != 4:
        raise ValueError(f"not a dotted-quad IPv4 address: {text!r}")
    value = 0
    for part in parts:
        if not part.isdigit() or len(part) > 3:
            raise ValueError(f"bad IPv4 octet {part!r} in {text!r}")
        octet = int(part)
        if octet > 255:
            raise ValueError(f"IPv4 octet out of range in {text!r}")
        value = (value << 8) | octet
    return value


_IP_CACHE: dict[str, int] = {}
_IP_CACHE_LIMIT = 1 << 20


def _cached_ip(text: str) -> int:
    value = _IP_CACHE.get(text)
    if value is None:
        value = ip_to_int(text)
        if len(_IP_CACHE) >= _IP_CACHE_LIMIT:
            _IP_CACHE.clear()
        _IP_CACHE[text] = value
    return value


def int_to_ip(value: int) -> str:
    return f"{(value >> 24) & 255}.{(value >> 16) & 255}.{(value >> 8) & 255}.{value & 255}"


class FlowKey(NamedTuple):
    """Destination address and port shared by the packets of one flow."""

    dst_addr: int
    dst_port: int

    def __str__(self) -> str:
        return f"{int_to_ip(self.dst_addr)}:{self.dst_port}"

    def to_json(self) -> dict:
        return {"dst_addr": int_to_ip(self.dst_addr), "dst_port": self.dst_port}

    @classmethod
    def from_json(cls, obj: dict) -> "FlowKey":
        return cls(ip_to_int(obj["dst_addr"]), int(obj["dst_port"]))

    @classmethod
    def parse(cls, text: str) -> "FlowKey":
        """Parse ``a.b.c.d:port``."""
        addr, sep, port = text.rpartition(":")
        if not sep:
            raise ValueError(f"expected ADDR:PORT, got {text!r}")
        port_no = int(port)
        if not 0 <= port_no <= 65535:
            raise ValueError(f"port out of range: {port_no}")
        return cls(ip_to_int(addr), port_no)


@dataclass(frozen=True, slots=True)
class FlowRecord:
    timestamp: float
    src_addr: int
    dst_addr: int
    src_port: int
    dst_port: int
    protocol: int
    packet_count: int
    byte_count: int

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise ValueError(f"timestamp must be finite and non-negative: {self.timestamp}")
        if not 0 <= self.src_port <= 65535:
            raise ValueError(f"src_port out of range: {self.src_port}")
        if not 0 <= self.dst_port <= 65535:
            raise ValueError(f"dst_port out of range: {self.dst_port}")
        if self.packet_count < 1:
            raise ValueError(f"packet_count must be >= 1: {self.packet_count}")
        if self.byte_count < 0:
            raise ValueError(f"byte_count must be >= 0: {self.byte_count}")
        if not 0 <= self.src_addr < 1 << 32 or not 0 <= self.dst_addr < 1 << 32:
            raise ValueError("address outside the IPv4 range")

    @property
    def key(self) -> FlowKey:
        return FlowKey(self.dst_addr, self.dst_port)

    def to_csv(self) -> str:
        return (
            f"{self.timestamp!r},{int_to_ip(self.src_addr)},{int_to_ip(self.dst_addr)},"
            f"{self.src_port},{self.dst_port},{self.protocol},"
            f"{self.packet_count},{self.byte_count}"
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "timestamp": self.timestamp,
                "src_addr": int_to_ip(self.src_addr),
                "dst_addr": int_to_ip(self.dst_addr),
                "src_port": self.src_port,
                "dst_port": self.dst_port,
                "protocol": self.protocol,
                "packet_count": self.packet_count,
                "byte_count": self.byte_count,
            },
            separators=(",", ":"),
        )


def _convert(values, line, line_number) -> FlowRecord:
    converted = []
    for name, raw in zip(FIELDS, values):
        try:
            if name == "timestamp":
                value = float(raw)
                if not math.isfinite(value) or value < 0:
                    raise ValueError("must be finite and non-negative")
            elif name in ("src_addr", "dst_addr"):
                if isinstance(raw, str):
                    value = ip_to_int(raw)
                elif isinstance(raw, int) and not isinstance(raw, bool) and 0 <= raw < 1 << 32:
                    value = raw
                else:
                    raise ValueError(f"not an IPv4 address: {raw!r}")
            else:
                if isinstance(raw, float) or isinstance(raw, bool):
                    raise ValueError("must be an integer")
                value = int(raw)
                if name.endswith("_port") and not 0 <= value <= 65535:
                    raise ValueError(f"port out of range 0-65535: {value}")
                if name == "packet_count" and value < 1:
                    raise ValueError(f"must be >= 1: {value}")
                if name == "byte_count" and value < 0:
                    raise ValueError(f"must be >= 0: {value}")
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), line=line, field=name, line_number=line_number) from None
        converted.append(value)
    return FlowRecord(*converted)


def parse_flow_record(line: str, format: str = "csv", line_number: int | None = None) -> FlowRecord:
    """
    Parse one trace line into a FlowRecord.

    CSV columns are, in order: timestamp, src_addr, dst_addr, src_port,
    dst_port, protocol, packet_count, byte_count. JSONL lines are objects
    with the same eight keys.

    Raises:
        ParseError: wrong field count, non-numeric values, ports out of
            range or packet_count < 1. The message names line and field.
    """
    text = line.strip()
    if not text:
        raise ParseError("empty line", line=line, line_number=line_number)
    if format == "csv":
        values = text.split(",")
        if len(values) != len(FIELDS):
            raise ParseError(
                f"expected {len(FIELDS)} fields, got {len(values)}", line=line, line_number=line_number
            )
        try:
            return FlowRecord(
                float(values[0]),
                _cached_ip(values[1]),
                _cached_ip(values[2]),
                int(values[3]),
                int(values[4]),
                int(values[5]),
                int(values[6]),
                int(values[7]),
            )
        except (TypeError, ValueError):
            # Slow path re-checks field by field to name the offending one.
            return _convert([v.strip() for v in values], line, line_number)
    if format == "jsonl":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=line, line_number=line_number) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", line=line, line_number=line_number)
        missing = [name for name in FIELDS if name not in obj]
        if missing or len(obj) != len(FIELDS):
            raise ParseError(
                f"expected exactly the fields {', '.join(FIELDS)}",
                line=line,
                field=missing[0] if missing else None,
                line_number=line_number,
            )
        return _convert([obj[name] for name in FIELDS], line, line_number)
    raise ConfigError(f"unknown trace format {format!r}")


def serialize_flow_record(record: FlowRecord, format: str = "csv") -> str:
    if format == "csv":
        return record.to_csv()
    if format == "jsonl":
        return record.to_json()
    raise ConfigError(f"unknown trace format {format!r}")


def guess_format(path) -> str:
    suffix = Path(path).suffix.lower()
    return "jsonl" if suffix in (".jsonl", ".json", ".ndjson") else "csv"


def iter_trace(path, format: str | None = None) -> Iterator[FlowRecord]:
    """Stream records from a CSV or JSONL trace file. A CSV header line is optional."""
    fmt = format or guess_format(path)
    with open(path, "r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if fmt == "csv" and number == 1 and line.lstrip().startswith("timestamp"):
                continue
            yield parse_flow_record(line, fmt, line_number=number)


def read_trace(path, format: str | None = None) -> list[FlowRecord]:
    return list(iter_trace(path, format))


def write_trace(records: Iterable[FlowRecord], path, format: str | None = None, header: bool = True) -> int:
    fmt = format or guess_format(path)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "csv" and header:
            fh.write(CSV_HEADER + "\n")
        for record in records:
            fh.write(serialize_flow_record(record, fmt))
            fh.write("\n")
            count += 1
    return count


@dataclass(frozen=True)
class TrafficWindow:
    """All records whose timestamp falls in ``[start_time, start_time + duration)``."""

    index: int
    start_time: float
    duration: float
    records: tuple[FlowRecord, ...] = ()

    @property
    def packet_total(self) -> int:
        return sum(r.packet_count for r in self.records)

    def __len__(self) -> int:
        return len(self.records)


def window_index(timestamp: float, epoch: float, duration: float) -> int:
    return math.floor((timestamp - epoch) / duration)


def iter_windows(
    records: Iterable[FlowRecord], duration: float, epoch: float | None = None
) -> Iterator[TrafficWindow]:
    """
    Bucket a timestamp-sorted record stream into contiguous windows.

    The epoch defaults to the first record's timestamp. Windows with no
    traffic are still yielded so indices stay contiguous.
    """
    if not duration > 0 or not math.isfinite(duration):
        raise ConfigError(f"window duration must be positive, got {duration}")
    current: list[FlowRecord] = []
    current_index = 0
    previous = None
    for position, record in enumerate(records):
        t = record.timestamp
        if previous is None:
            if epoch is None:
                epoch = t
            elif t < epoch:
                raise OrderingError(f"record {position} precedes the epoch {epoch}", index=position)
        elif t < previous:
            raise OrderingError(
                f"records not sorted by timestamp: record {position} ({t}) precedes record "
                f"{position - 1} ({previous})",
                index=position,
            )
        previous = t
        idx = math.floor((t - epoch) / duration)
        while idx > current_index:
            yield TrafficWindow(current_index, epoch + current_index * duration, duration, tuple(current))
            current = []
            current_index += 1
        current.append(record)
    if previous is not None:
        yield TrafficWindow(current_index, epoch + current_index * duration, duration, tuple(current))


def windowize(records: Sequence[FlowRecord], duration: float, epoch: float | None = None) -> list[TrafficWindow]:
    return list(iter_windows(records, duration, epoch))


def group_by_flow_key(window: TrafficWindow) -> dict[FlowKey, list[FlowRecord]]:
    groups: dict[FlowKey, list[FlowRecord]] = {}
    for record in window.records:
        key = FlowKey(record.dst_addr, record.dst_port)
        bucket = groups.get(key)
        if bucket is None:
            groups[key] = [record]
        else:
            bucket.append(record)
    return groups
