"""
Seeded synthetic traces: legitimate background traffic and DDoS floods.

Randomness comes from numpy's PCG64 generator seeded with an explicit
64-bit integer, so a given parameter set always yields the same trace.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, OrderingError
from .flows import FlowKey, FlowRecord, ip_to_int

SOURCE_BASE = ip_to_int("10.0.0.0")
DESTINATION_BASE = ip_to_int("172.16.0.0")
BOT_BASE = ip_to_int("198.18.0.0")
SERVICE_PORTS = (80, 443, 53, 22, 25, 8080, 3306, 110)
DEFAULT_VICTIM = FlowKey(ip_to_int("203.0.113.10"), 80)
SPOOF_MODES = ("fixed-source", "random-source")
_SEED_LIMIT = 1 << 64


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _check_seed(seed) -> None:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < _SEED_LIMIT:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")


@dataclass(frozen=True)
class LegitParams:
    n_sources: int = 200
    n_destinations: int = 50
    records_per_second: float = 200.0
    duration: float = 30.0
    source_skew: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_sources < 1 or self.n_sources > (1 << 24) - 2:
            raise ConfigError(f"n_sources must be in [1, 2^24 - 2], got {self.n_sources}")
        if self.n_destinations < 1 or self.n_destinations > (1 << 20):
            raise ConfigError(f"n_destinations must be in [1, 2^20], got {self.n_destinations}")
        if not self.records_per_second > 0:
            raise ConfigError("records_per_second must be > 0")
        if not self.duration > 0:
            raise ConfigError("duration must be > 0")
        if not self.source_skew >= 0:
            raise ConfigError("source_skew must be >= 0")
        _check_seed(self.seed)


@dataclass(frozen=True)
class AttackParams:
    n_bots: int = 1
    victim: FlowKey = DEFAULT_VICTIM
    records_per_second: float = 1000.0
    start: float = 10.0
    duration: float = 10.0
    spoof_mode: str = "fixed-source"
    seed: int = 1

    def __post_init__(self):
        if self.n_bots < 1 or self.n_bots > (1 << 17) - 2:
            raise ConfigError(f"n_bots must be in [1, 2^17 - 2], got {self.n_bots}")
        if not self.records_per_second > 0:
            raise ConfigError("records_per_second must be > 0")
        if not (self.start >= 0 and math.isfinite(self.start)):
            raise ConfigError("attack start must be >= 0")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError("attack duration must be > 0")
        if self.spoof_mode not in SPOOF_MODES:
            raise ConfigError(f"spoof_mode must be one of {SPOOF_MODES}, got {self.spoof_mode!r}")
        _check_seed(self.seed)
        object.__setattr__(self, "victim", FlowKey(*self.victim))

    @property
    def interval(self) -> tuple[float, float]:
        return (self.start, self.start + self.duration)


def _stratified_times(rng, n: int, start: float, span: float) -> np.ndarray:
    # One timestamp per equal slot, jittered inside it; the first sits on `start`.
    u = rng.random(n)
    if n:
        u[0] = 0.0
    t = start + span * (np.arange(n) + u) / n
    return np.minimum(t, np.nextafter(start + span, -np.inf))


def gen_legitimate(params: LegitParams) -> list[FlowRecord]:
    """
    Background traffic from a pool of sources to a pool of servers.

    Each destination runs one service port. Sources are uniform when
    ``source_skew`` is 0, Zipf-weighted by rank otherwise. The first record
    is at t = 0 so the trace epoch coincides with the generator clock.
    """
    rng = _rng(params.seed)
    n = int(round(params.records_per_second * params.duration))
    times = _stratified_times(rng, n, 0.0, params.duration)
    if params.source_skew == 0:
        src_idx = rng.integers(0, params.n_sources, n)
    else:
        weights = 1.0 / np.arange(1, params.n_sources + 1) ** params.source_skew
        src_idx = rng.choice(params.n_sources, size=n, p=weights / weights.sum())
    dst_idx = rng.integers(0, params.n_destinations, n)
    src_ports = rng.integers(1024, 65536, n)
    packets = rng.integers(1, 11, n)
    sizes = rng.integers(40, 1501, n)

    ports = [SERVICE_PORTS[j % len(SERVICE_PORTS)] for j in range(params.n_destinations)]
    records = []
    for t, s, d, sp, pk, sz in zip(
        times.tolist(), src_idx.tolist(), dst_idx.tolist(), src_ports.tolist(), packets.tolist(), sizes.tolist()
    ):
        port = ports[d]
        records.append(
            FlowRecord(t, SOURCE_BASE + 1 + s, DESTINATION_BASE + 1 + d, sp, port, 17 if port == 53 else 6, pk, pk * sz)
        )
    return records


def gen_ddos(params: AttackParams) -> list[FlowRecord]:
    """
    Flood records aimed at ``params.victim``, confined to the attack interval.

    ``fixed-source`` cycles a pool of ``n_bots`` bot addresses in order with
    sequential source ports; ``random-source`` draws a spoofed address for
    every record from the whole IPv4 space.
    """
    rng = _rng(params.seed)
    n = int(round(params.records_per_second * params.duration))
    times = _stratified_times(rng, n, params.start, params.duration)
    if params.spoof_mode == "fixed-source":
        sources = [BOT_BASE + 1 + (i % params.n_bots) for i in range(n)]
        src_ports = [1024 + (i % 64512) for i in range(n)]
    else:
        sources = rng.integers(1, (1 << 32) - 1, n).tolist()
        src_ports = rng.integers(1024, 65536, n).tolist()
    packets = rng.integers(1, 11, n).tolist()
    addr, port = params.victim
    return [
        FlowRecord(t, s, addr, sp, port, 6, pk, pk * 60)
        for t, s, sp, pk in zip(times.tolist(), sources, src_ports, packets)
    ]


def window_labels(
    n_windows: int, epoch: float, window_duration: float, attack_intervals: Sequence[tuple[float, float]]
) -> list[str]:
    labels = []
    for w in range(n_windows):
        lo = epoch + w * window_duration
        hi = lo + window_duration
        hit = any(lo < end and hi > start for start, end in attack_intervals)
        labels.append("attack" if hit else "clean")
    return labels


def mix(
    traces: Sequence[Sequence[FlowRecord]],
    window_duration: float | None = None,
    attack_intervals: Sequence[tuple[float, float]] = (),
) -> tuple[list[FlowRecord], list[str]]:
    """
    Merge sorted traces by timestamp and label each window of the result.

    Ties keep the order of ``traces``. A window is labeled "attack" when it
    overlaps any of ``attack_intervals``. Labels are only produced when
    ``window_duration`` is given.
    """
    for number, trace in enumerate(traces):
        for i in range(1, len(trace)):
            if trace[i].timestamp < trace[i - 1].timestamp:
                raise OrderingError(f"trace {number} is not sorted at record {i}", index=i)
    merged = list(heapq.merge(*traces, key=lambda r: r.timestamp))
    labels: list[str] = []
    if window_duration is not None:
        if not window_duration > 0:
            raise ConfigError("window duration must be > 0")
        if merged:
            epoch = merged[0].timestamp
            n_windows = math.floor((merged[-1].timestamp - epoch) / window_duration) + 1
            labels = window_labels(n_windows, epoch, window_duration, attack_intervals)
    return merged, labels


@dataclass
class Scenario:
    records: list[FlowRecord]
    labels: list[str]
    legit: LegitParams
    attack: AttackParams | None
    window_duration: float
    attack_windows: list[int] = field(default_factory=list)


def standard_scenario(
    seed: int = 0,
    legit: LegitParams | None = None,
    attack: AttackParams | None = None,
    window_duration: float = 1.0,
    with_attack: bool = True,
) -> Scenario:
    """
    200 uniform sources over 30 s plus, by default, a single-bot flood at five
    times the background record rate on 203.0.113.10:80 during [10, 20).
    """
    legit = legit or LegitParams(seed=seed)
    if with_attack:
        attack = attack or AttackParams(seed=(seed + 1) % _SEED_LIMIT)
    else:
        attack = None
    traces = [gen_legitimate(legit)]
    intervals = []
    if attack is not None:
        traces.append(gen_ddos(attack))
        intervals.append(attack.interval)
    records, labels = mix(traces, window_duration, intervals)
    return Scenario(
        records=records,
        labels=labels,
        legit=legit,
        attack=attack,
        window_duration=window_duration,
        attack_windows=[i for i, label in enumerate(labels) if label == "attack"],
    )
