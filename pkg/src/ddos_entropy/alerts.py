"""
Alerts, client notifications and the advisory report for the cloud provider.

The alert log is JSONL, one alert per line, written in window-index order
with a window's stage-1 alert ahead of its stage-2 alert.
"""

from __future__ import annotations

import io
import json
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .entropy import FeatureKind
from .errors import AlertSinkError
from .flows import FlowKey


@dataclass(frozen=True)
class Alert:
    window_index: int
    stage: int
    timestamp: float
    observed: float
    threshold: float
    feature: Optional[FeatureKind] = None
    flow: Optional[FlowKey] = None
    message: str = ""

    def validate(self) -> None:
        if self.stage == 1:
            if self.feature is None:
                raise ValueError("stage-1 alert needs a feature")
            if not self.observed < self.threshold:
                raise ValueError(
                    f"stage-1 alert requires observed < threshold, got {self.observed} >= {self.threshold}"
                )
        elif self.stage == 2:
            if self.flow is None:
                raise ValueError("stage-2 alert needs a flow")
            if not self.observed <= self.threshold:
                raise ValueError(
                    f"stage-2 alert requires observed <= threshold, got {self.observed} > {self.threshold}"
                )
        else:
            raise ValueError(f"alert stage must be 1 or 2, got {self.stage}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "window_index": self.window_index,
                "stage": self.stage,
                "timestamp": self.timestamp,
                "feature": self.feature.value if self.feature is not None else None,
                "observed": self.observed,
                "threshold": self.threshold,
                "flow": self.flow.to_json() if self.flow is not None else None,
                "message": self.message,
            },
            separators=(",", ":"),
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "Alert":
        obj = json.loads(line)
        return cls(
            window_index=obj["window_index"],
            stage=obj["stage"],
            timestamp=obj["timestamp"],
            observed=obj["observed"],
            threshold=obj["threshold"],
            feature=FeatureKind(obj["feature"]) if obj.get("feature") else None,
            flow=FlowKey.from_json(obj["flow"]) if obj.get("flow") else None,
            message=obj.get("message", ""),
        )


def notify_client(alert: Alert) -> str:
    """One-line human-readable notice for the protected client."""
    if alert.stage == 2:
        return (
            f"ATTACK CONFIRMED window {alert.window_index}: flow {alert.flow}, "
            f"entropy rate {alert.observed:.2f} ≤ th2 {alert.threshold:.2f}"
        )
    text = (
        f"SUSPECTED window {alert.window_index}: {alert.feature.value} "
        f"normalized entropy {alert.observed:.2f} < th1 {alert.threshold:.2f}"
    )
    if alert.flow is not None:
        text += f", flow {alert.flow}"
    return text


class AlertLog:
    """
    Append-only JSONL alert sink.

    Writes are serialized with a lock and must arrive in (window, stage)
    order. Any failure to write is raised as AlertSinkError.
    """

    def __init__(self, stream: io.TextIOBase):
        self._stream = stream
        self._lock = threading.Lock()
        self._last: tuple[int, int] | None = None
        self.count = 0

    @classmethod
    def open(cls, path) -> "AlertLog":
        try:
            return cls(open(path, "w", encoding="utf-8"))
        except OSError as exc:
            raise AlertSinkError(f"cannot open alert log {path}: {exc}") from exc

    def emit(self, alert: Alert) -> int:
        alert.validate()
        position = (alert.window_index, alert.stage)
        with self._lock:
            if self._last is not None and position <= self._last:
                raise ValueError(f"alert {position} out of order after {self._last}")
            line = alert.to_json() + "\n"
            try:
                self._stream.write(line)
            except (OSError, ValueError) as exc:
                raise AlertSinkError(f"alert log write failed: {exc}") from exc
            self._last = position
            self.count += 1
            return self.count

    def close(self) -> None:
        try:
            self._stream.close()
        except OSError as exc:
            raise AlertSinkError(f"alert log close failed: {exc}") from exc

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def emit_alert(alert: Alert, sink: AlertLog) -> int:
    """Validate and append one alert; returns its 1-based position in the log."""
    return sink.emit(alert)


@dataclass(frozen=True)
class AttackInterval:
    start_window: int
    end_window: int
    victim: FlowKey
    peak_share: float

    def to_json(self) -> dict:
        return {
            "start_window": self.start_window,
            "end_window": self.end_window,
            "victim": self.victim.to_json(),
            "peak_share": self.peak_share,
        }


@dataclass(frozen=True)
class AdvisoryReport:
    trace_id: str
    config_digest: str
    attack_intervals: tuple[AttackInterval, ...] = ()
    totals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "config_digest": self.config_digest,
            "attack_intervals": [iv.to_json() for iv in self.attack_intervals],
            "totals": dict(self.totals),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def build_advisory_report(verdicts: Iterable, config, trace_id: str = "") -> AdvisoryReport:
    """
    Summarize a run for the cloud provider.

    Consecutive Attacked windows sharing one attack flow become a single
    interval. Totals are recomputed from the verdicts.
    """
    intervals: list[AttackInterval] = []
    open_iv: list | None = None  # [start, end, victim, peak]
    windows = suspected = attacked = discarded = 0
    for v in verdicts:
        windows += 1
        state = v.state.value if hasattr(v.state, "value") else v.state
        if state in ("suspected", "attacked"):
            suspected += 1
        if state != "attacked":
            if open_iv is not None:
                intervals.append(AttackInterval(*open_iv))
                open_iv = None
            continue
        attacked += 1
        discarded += v.discarded_packets
        share = v.dominant_share if v.dominant_share is not None else 0.0
        if open_iv is not None and open_iv[2] == v.attack_flow and open_iv[1] == v.window_index - 1:
            open_iv[1] = v.window_index
            open_iv[3] = max(open_iv[3], share)
        else:
            if open_iv is not None:
                intervals.append(AttackInterval(*open_iv))
            open_iv = [v.window_index, v.window_index, v.attack_flow, share]
    if open_iv is not None:
        intervals.append(AttackInterval(*open_iv))
    return AdvisoryReport(
        trace_id=trace_id,
        config_digest=config.digest(),
        attack_intervals=tuple(intervals),
        totals={
            "windows": windows,
            "suspected": suspected,
            "attacked": attacked,
            "discarded_packets": discarded,
        },
    )
