"""
Two-stage detection.

Stage 1 (network-site router) flags a window as Suspected when the
normalized entropy of a configured feature falls below ``th1``. Stage 2
(cloud-site router) takes the dominant destination flow of a suspected
window, builds the per-packet source-address sequence of that flow over
the recent window history, and confirms the attack when its entropy rate
is at most ``th2``.
"""

from __future__ import annotations

import json
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import islice
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

from .alerts import Alert, AlertLog, notify_client
from .config import DetectorConfig
from .entropy import FEATURE_ORDER, EntropyReport, FeatureKind, entropy_rate, entropy_report
from .errors import InsufficientDataError, NoDominantFlowError
from .flows import FlowKey, FlowRecord, TrafficWindow, iter_windows


class State(str, Enum):
    NORMAL = "normal"
    SUSPECTED = "suspected"
    ATTACKED = "attacked"


class Stage1Result(NamedTuple):
    state: State
    reports: list[EntropyReport]
    triggering: tuple[FeatureKind, ...]


class Stage2Result(NamedTuple):
    state: State
    entropy_rate: Optional[float]
    flow: FlowKey
    share: float
    discarded_packets: int
    note: Optional[str] = None


@dataclass(frozen=True)
class WindowVerdict:
    window_index: int
    start_time: float
    state: State
    triggering_features: tuple[FeatureKind, ...] = ()
    ne_values: dict = field(default_factory=dict)
    entropy_rate: Optional[float] = None
    attack_flow: Optional[FlowKey] = None
    dominant_share: Optional[float] = None
    discarded_packets: int = 0
    note: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "window_index": self.window_index,
                "start_time": self.start_time,
                "state": self.state.value,
                "triggering_features": [k.value for k in self.triggering_features],
                "ne_values": {k.value: v for k, v in self.ne_values.items()},
                "entropy_rate": self.entropy_rate,
                "attack_flow": self.attack_flow.to_json() if self.attack_flow else None,
                "dominant_share": self.dominant_share,
                "discarded_packets": self.discarded_packets,
                "note": self.note,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "WindowVerdict":
        obj = json.loads(line)
        return cls(
            window_index=obj["window_index"],
            start_time=obj["start_time"],
            state=State(obj["state"]),
            triggering_features=tuple(FeatureKind(k) for k in obj["triggering_features"]),
            ne_values={FeatureKind(k): v for k, v in obj["ne_values"].items()},
            entropy_rate=obj["entropy_rate"],
            attack_flow=FlowKey.from_json(obj["attack_flow"]) if obj["attack_flow"] else None,
            dominant_share=obj["dominant_share"],
            discarded_packets=obj["discarded_packets"],
            note=obj.get("note"),
        )


@dataclass
class PipelineSummary:
    windows: int = 0
    suspected: int = 0
    attacked: int = 0
    discarded_packets: int = 0
    stage1_alerts: int = 0
    stage2_alerts: int = 0
    verdicts: list[WindowVerdict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "windows": self.windows,
            "suspected": self.suspected,
            "attacked": self.attacked,
            "discarded_packets": self.discarded_packets,
        }


def stage1_detect(window: TrafficWindow, config: DetectorConfig) -> Stage1Result:
    """Normalized-entropy test of every configured feature against th1 (strict <)."""
    if not window.records:
        return Stage1Result(State.NORMAL, [], ())
    reports = [entropy_report(window, f, config.log_base) for f in config.features]
    tripped = tuple(r.feature for r in reports if r.normalized_entropy < config.th1)
    if config.feature_combination == "all":
        suspected = len(tripped) == len(reports)
    else:
        suspected = bool(tripped)
    if suspected:
        return Stage1Result(State.SUSPECTED, reports, tripped)
    return Stage1Result(State.NORMAL, reports, ())


def flow_packet_totals(window: TrafficWindow) -> dict[FlowKey, int]:
    totals: dict = {}
    get = totals.get
    for r in window.records:
        key = (r.dst_addr, r.dst_port)
        totals[key] = get(key, 0) + r.packet_count
    return {FlowKey(*k): v for k, v in totals.items()}


def identify_dominant_flow(window: TrafficWindow) -> tuple[FlowKey, float]:
    """Flow with the largest packet share; ties go to the smallest (dst_addr, dst_port)."""
    totals = flow_packet_totals(window)
    if not totals:
        raise NoDominantFlowError(f"window {window.index} has no traffic")
    key = min(totals, key=lambda k: (-totals[k], k))
    return key, totals[key] / sum(totals.values())


def flow_source_symbols(windows: Iterable[TrafficWindow], key: FlowKey) -> list[int]:
    """Source address of every packet of ``key`` in record order, one symbol per packet."""
    addr, port = key
    symbols: list[int] = []
    for window in windows:
        for r in window.records:
            if r.dst_addr == addr and r.dst_port == port:
                if r.packet_count == 1:
                    symbols.append(r.src_addr)
                else:
                    symbols.extend([r.src_addr] * r.packet_count)
    return symbols


def stage2_confirm(
    suspected_index: int, history: Sequence[TrafficWindow], config: DetectorConfig
) -> Stage2Result:
    """
    Entropy-rate confirmation of the suspected window's dominant flow.

    ``history`` is the trailing run of windows ending at (and including) the
    suspected one. The window stays Suspected when the symbol sequence is too
    short for the configured block order.
    """
    target = next((w for w in history if w.index == suspected_index), None)
    if target is None:
        raise ValueError(f"history does not contain window {suspected_index}")
    key, share = identify_dominant_flow(target)
    window_list = [w for w in history if w.index <= suspected_index][-config.confirmation_history:]
    symbols = flow_source_symbols(window_list, key)
    try:
        rate = entropy_rate(symbols, config.block_order, config.log_base)
    except InsufficientDataError as exc:
        return Stage2Result(State.SUSPECTED, None, key, share, 0, f"insufficient data: {exc}")
    if rate <= config.th2:
        discarded = flow_packet_totals(target)[key]
        return Stage2Result(State.ATTACKED, rate, key, share, discarded)
    return Stage2Result(State.SUSPECTED, rate, key, share, 0)


def _lead_feature(triggering, ne_values) -> FeatureKind:
    return min(triggering, key=lambda f: (ne_values[f], FEATURE_ORDER[f]))


def _chunks(iterable, size):
    it = iter(iterable)
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield block


def run_pipeline(
    records: Iterable[FlowRecord],
    config: DetectorConfig,
    alert_sink: AlertLog | None = None,
    notify: Callable[[str], None] | None = None,
    workers: int = 1,
    chunk_size: int = 64,
) -> PipelineSummary:
    """
    Windowize ``records`` and run both stages over every window.

    Stage 1 may run on ``workers`` threads; stage 2 and alert emission run
    in window order, so output does not depend on the worker count.
    """
    summary = PipelineSummary()
    history: deque[TrafficWindow] = deque(maxlen=config.confirmation_history)
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for block in _chunks(iter_windows(records, config.window_duration), chunk_size):
            if executor is not None:
                results = list(executor.map(stage1_detect, block, [config] * len(block)))
            else:
                results = [stage1_detect(w, config) for w in block]
            for window, s1 in zip(block, results):
                history.append(window)
                verdict = _decide(window, s1, history, config)
                summary.verdicts.append(verdict)
                _record(summary, verdict, config, alert_sink, notify)
    finally:
        if executor is not None:
            executor.shutdown()
    return summary


def _decide(window, s1: Stage1Result, history, config) -> WindowVerdict:
    ne_values = {r.feature: r.normalized_entropy for r in s1.reports}
    if s1.state is State.NORMAL:
        return WindowVerdict(window.index, window.start_time, State.NORMAL, ne_values=ne_values)
    s2 = stage2_confirm(window.index, history, config)
    attacked = s2.state is State.ATTACKED
    return WindowVerdict(
        window_index=window.index,
        start_time=window.start_time,
        state=s2.state,
        triggering_features=s1.triggering,
        ne_values=ne_values,
        entropy_rate=s2.entropy_rate,
        attack_flow=s2.flow if attacked else None,
        dominant_share=s2.share,
        discarded_packets=s2.discarded_packets,
        note=s2.note,
    )


def _record(summary: PipelineSummary, verdict: WindowVerdict, config, alert_sink, notify) -> None:
    summary.windows += 1
    if verdict.state is State.NORMAL:
        return
    summary.suspected += 1
    lead = _lead_feature(verdict.triggering_features, verdict.ne_values)
    alerts = [
        Alert(
            window_index=verdict.window_index,
            stage=1,
            timestamp=verdict.start_time,
            observed=verdict.ne_values[lead],
            threshold=config.th1,
            feature=lead,
        )
    ]
    summary.stage1_alerts += 1
    if verdict.state is State.ATTACKED:
        summary.attacked += 1
        summary.discarded_packets += verdict.discarded_packets
        alerts.append(
            Alert(
                window_index=verdict.window_index,
                stage=2,
                timestamp=verdict.start_time,
                observed=verdict.entropy_rate,
                threshold=config.th2,
                flow=verdict.attack_flow,
            )
        )
        summary.stage2_alerts += 1
    for alert in alerts:
        message = notify_client(alert)
        alert = replace(alert, message=message)
        if alert_sink is not None:
            alert_sink.emit(alert)
        if notify is not None:
            notify(message)


def verdicts_to_jsonl(verdicts: Iterable[WindowVerdict]) -> str:
    return "".join(v.to_json() + "\n" for v in verdicts)


def write_verdicts(verdicts: Iterable[WindowVerdict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(verdicts_to_jsonl(verdicts))


def read_verdicts(path) -> list[WindowVerdict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [WindowVerdict.from_json(line) for line in fh if line.strip()]
