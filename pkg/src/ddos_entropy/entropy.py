"""Per-window feature distributions, Shannon and normalized entropy, entropy rate."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Mapping, Sequence

from .errors import ConfigError, InsufficientDataError
from .flows import TrafficWindow


class FeatureKind(str, Enum):
    SRC_ADDR = "src_addr"
    DST_ADDR = "dst_addr"
    SRC_PORT = "src_port"
    DST_PORT = "dst_port"
    FLOW_SIZE = "flow_size"
    IN_DEGREE = "in_degree"

    @property
    def weighting(self) -> str:
        if self is FeatureKind.FLOW_SIZE:
            return "flow"
        if self is FeatureKind.IN_DEGREE:
            return "host"
        return "packet"

    @classmethod
    def parse(cls, text: str) -> "FeatureKind":
        norm = text.strip().lower().replace("-", "_")
        for kind in cls:
            if norm in (kind.value, kind.name.lower(), kind.value.replace("_", "")):
                return kind
        raise ConfigError(f"unknown feature {text!r}; choose from {', '.join(k.value for k in cls)}")


FEATURE_ORDER = {kind: position for position, kind in enumerate(FeatureKind)}

_PACKET_FIELD = {
    FeatureKind.SRC_ADDR: "src_addr",
    FeatureKind.DST_ADDR: "dst_addr",
    FeatureKind.SRC_PORT: "src_port",
    FeatureKind.DST_PORT: "dst_port",
}


@dataclass(frozen=True)
class FeatureDistribution:
    """Empirical counts m_i of one feature's values in a window.

    Probabilities are never stored; they are derived as count / total.
    """

    feature: FeatureKind | None
    counts: Mapping[Hashable, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def distinct(self) -> int:
        return len(self.counts)

    def probabilities(self) -> dict:
        m = self.total
        return {value: c / m for value, c in self.counts.items()}

    @classmethod
    def from_values(cls, values, feature: FeatureKind | None = None) -> "FeatureDistribution":
        return cls(feature, dict(Counter(values)))


@dataclass(frozen=True)
class EntropyReport:
    window_index: int
    feature: FeatureKind
    entropy: float
    normalized_entropy: float
    distinct: int
    total: int


def _check_base(base: float) -> None:
    if not base > 1:
        raise ConfigError(f"log base must be > 1, got {base}")


def build_distribution(window: TrafficWindow, feature: FeatureKind) -> FeatureDistribution:
    """
    Count one feature over a window.

    Address and port features are packet-weighted. FlowSize counts each
    destination flow once, binned by its packet total. InDegree delegates
    to :func:`in_degree_distribution`.
    """
    feature = FeatureKind(feature)
    if feature is FeatureKind.IN_DEGREE:
        return in_degree_distribution(window)
    counts: dict = {}
    if feature is FeatureKind.FLOW_SIZE:
        sizes: dict[tuple[int, int], int] = {}
        for r in window.records:
            key = (r.dst_addr, r.dst_port)
            sizes[key] = sizes.get(key, 0) + r.packet_count
        for size in sizes.values():
            counts[size] = counts.get(size, 0) + 1
        return FeatureDistribution(feature, counts)
    attr = _PACKET_FIELD[feature]
    get = counts.get
    for r in window.records:
        value = getattr(r, attr)
        counts[value] = get(value, 0) + r.packet_count
    return FeatureDistribution(feature, counts)


def in_degree_distribution(window: TrafficWindow) -> FeatureDistribution:
    """Histogram of per-destination-host in-degree (distinct sources seen), one count per host."""
    sources: dict[int, set] = {}
    for r in window.records:
        sources.setdefault(r.dst_addr, set()).add(r.src_addr)
    counts: dict[int, int] = {}
    for srcs in sources.values():
        degree = len(srcs)
        counts[degree] = counts.get(degree, 0) + 1
    return FeatureDistribution(FeatureKind.IN_DEGREE, counts)


def entropy_of_counts(counts, base: float = 2.0) -> float:
    """-sum p log p over an iterable of positive integer counts."""
    _check_base(base)
    counts = [c for c in counts if c]
    if len(counts) <= 1:
        return 0.0
    m = sum(counts)
    h = 0.0
    for c in counts:
        p = c / m
        h -= p * math.log(p)
    h /= math.log(base)
    # Rounding can leave tiny negatives or overshoot log(n0) by an ulp.
    return min(max(h, 0.0), math.log(len(counts)) / math.log(base))


def shannon_entropy(dist: FeatureDistribution, base: float = 2.0) -> float:
    return entropy_of_counts(dist.counts.values(), base)


def normalized_entropy(dist: FeatureDistribution, base: float = 2.0) -> float:
    """H / log(n0); defined as 0 when fewer than two distinct values were seen."""
    _check_base(base)
    n0 = dist.distinct
    if n0 <= 1:
        return 0.0
    h = shannon_entropy(dist, base)
    return min(max(h / (math.log(n0) / math.log(base)), 0.0), 1.0)


def entropy_report(
    window: TrafficWindow, feature: FeatureKind, base: float = 2.0
) -> EntropyReport:
    dist = build_distribution(window, feature)
    return EntropyReport(
        window_index=window.index,
        feature=FeatureKind(feature),
        entropy=shannon_entropy(dist, base),
        normalized_entropy=normalized_entropy(dist, base),
        distinct=dist.distinct,
        total=dist.total,
    )


def block_counts(symbols: Sequence, k: int) -> Counter:
    """Counts of all overlapping length-k blocks."""
    if k == 1:
        return Counter(symbols)
    return Counter(zip(*(symbols[i: len(symbols) - k + 1 + i] for i in range(k))))


def entropy_rate(symbols: Sequence, block_order: int = 2, base: float = 2.0) -> float:
    """
    Plug-in entropy rate estimate H_k / k.

    H_k is the Shannon entropy of the empirical distribution of overlapping
    k-blocks of ``symbols``. With ``block_order=1`` this is the plain sample
    entropy of the symbols.

    Raises:
        ConfigError: block_order < 1 or base <= 1.
        InsufficientDataError: fewer than block_order symbols.
    """
    _check_base(base)
    if not isinstance(block_order, int) or block_order < 1:
        raise ConfigError(f"block order must be an integer >= 1, got {block_order!r}")
    if not isinstance(symbols, (list, tuple)):
        symbols = list(symbols)
    if len(symbols) < block_order:
        raise InsufficientDataError(
            f"need at least {block_order} symbols for block order {block_order}, got {len(symbols)}"
        )
    return entropy_of_counts(block_counts(symbols, block_order).values(), base) / block_order
