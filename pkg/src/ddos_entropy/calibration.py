"""Threshold calibration from attack-free traffic, and scoring against labeled traces."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .config import DetectorConfig
from .entropy import FeatureKind, entropy_rate, entropy_report
from .errors import CalibrationError, ConfigError, EvaluationError, InsufficientDataError
from .flows import FlowRecord, iter_windows
from .pipeline import State, flow_source_symbols, identify_dominant_flow, run_pipeline

MIN_BASELINE_WINDOWS = 10
LABELS = ("clean", "attack")


@dataclass(frozen=True)
class BaselineProfile:
    feature: FeatureKind
    ne_samples: tuple[float, ...]
    rate_samples: tuple[float, ...]
    config_digest: str = ""

    def to_json(self) -> dict:
        return {
            "feature": self.feature.value,
            "ne_samples": list(self.ne_samples),
            "rate_samples": list(self.rate_samples),
            "config_digest": self.config_digest,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BaselineProfile":
        return cls(
            feature=FeatureKind(obj["feature"]),
            ne_samples=tuple(obj["ne_samples"]),
            rate_samples=tuple(obj["rate_samples"]),
            config_digest=obj.get("config_digest", ""),
        )


def _rank(target_fpr: float, n: int) -> int:
    # Exact decimal arithmetic: ceil(0.07 * 100) must be 7, not 8.
    return max(1, math.ceil(Fraction(str(target_fpr)) * n))


def calibrate_threshold(samples: Sequence[float], target_fpr: float) -> float:
    """
    Nearest-rank lower quantile of ``samples``.

    Sorts ascending and returns the element at 1-based rank
    ``ceil(target_fpr * N)``. Under a strict ``<`` test fewer than
    ``target_fpr * N`` of the samples fall below it.
    """
    if not 0.0 < target_fpr < 1.0:
        raise ConfigError(f"target false-positive rate must lie in (0, 1), got {target_fpr}")
    values = sorted(samples)
    if not values:
        raise CalibrationError("cannot calibrate a threshold from no samples")
    return values[_rank(target_fpr, len(values)) - 1]


def build_baseline(
    clean_trace: Iterable[FlowRecord],
    config: DetectorConfig,
    min_windows: int = MIN_BASELINE_WINDOWS,
) -> dict[FeatureKind, BaselineProfile]:
    """
    Collect per-window normalized entropy of each configured feature, plus the
    entropy rate of each window's dominant flow, from attack-free traffic.

    Only windows with traffic contribute; the NE samples of different
    features are aligned window by window.
    """
    ne: dict[FeatureKind, list[float]] = {f: [] for f in config.features}
    rates: list[float] = []
    history = deque(maxlen=config.confirmation_history)
    windows = 0
    for window in iter_windows(clean_trace, config.window_duration):
        history.append(window)
        if not window.records:
            continue
        windows += 1
        for f in config.features:
            ne[f].append(entropy_report(window, f, config.log_base).normalized_entropy)
        key, _ = identify_dominant_flow(window)
        try:
            rates.append(entropy_rate(flow_source_symbols(history, key), config.block_order, config.log_base))
        except InsufficientDataError:
            pass
    if windows < min_windows:
        raise CalibrationError(f"baseline has {windows} non-empty windows; at least {min_windows} are required")
    digest = config.digest(thresholds=False)
    return {f: BaselineProfile(f, tuple(ne[f]), tuple(rates), digest) for f in config.features}


def combined_ne_samples(profiles: dict[FeatureKind, BaselineProfile], combination: str = "any") -> list[float]:
    """
    One score per baseline window matching how stage 1 combines features:
    a window trips under ANY when its smallest NE is below th1, under ALL
    when its largest is.
    """
    columns = [p.ne_samples for p in profiles.values()]
    if not columns or not columns[0]:
        raise CalibrationError("baseline profile has no samples")
    if len({len(c) for c in columns}) != 1:
        raise CalibrationError("feature sample sequences are not aligned")
    pick = max if combination == "all" else min
    return [pick(row) for row in zip(*columns)]


def check_profile(profiles: dict[FeatureKind, BaselineProfile], config: DetectorConfig) -> None:
    expected = config.digest(thresholds=False)
    for p in profiles.values():
        if p.config_digest and p.config_digest != expected:
            raise CalibrationError(
                f"baseline was built with config {p.config_digest}, detector uses {expected}"
            )
    if set(profiles) != set(config.features):
        raise CalibrationError("baseline features differ from the detector's features")


def calibrate_th1(
    profiles: dict[FeatureKind, BaselineProfile], config: DetectorConfig, target_fpr: float
) -> float:
    check_profile(profiles, config)
    return calibrate_threshold(combined_ne_samples(profiles, config.feature_combination), target_fpr)


def calibrate_th2(
    profiles: dict[FeatureKind, BaselineProfile], config: DetectorConfig, target_fpr: float
) -> float:
    """Nearest-rank quantile of baseline dominant-flow entropy rates (the stage-2 statistic)."""
    check_profile(profiles, config)
    rates = next(iter(profiles.values())).rate_samples
    if not rates:
        raise CalibrationError("baseline has no entropy-rate samples")
    return calibrate_threshold(rates, target_fpr)


def calibrate(
    clean_trace: Iterable[FlowRecord],
    config: DetectorConfig,
    target_fpr: float,
    calibrate_rate: bool = False,
) -> tuple[DetectorConfig, dict[FeatureKind, BaselineProfile]]:
    """Baseline + th1 (and optionally th2) in one step; returns the updated config."""
    profiles = build_baseline(clean_trace, config)
    th1 = calibrate_th1(profiles, config, target_fpr)
    th2 = calibrate_th2(profiles, config, target_fpr) if calibrate_rate else None
    return config.with_thresholds(th1=th1, th2=th2), profiles


def profiles_to_json(profiles: dict[FeatureKind, BaselineProfile]) -> list[dict]:
    return [p.to_json() for p in profiles.values()]


def profiles_from_json(items: list[dict]) -> dict[FeatureKind, BaselineProfile]:
    profiles = [BaselineProfile.from_json(obj) for obj in items]
    return {p.feature: p for p in profiles}


@dataclass(frozen=True)
class EvaluationMetrics:
    detection_rate: Optional[float]
    false_positive_rate: Optional[float]
    stage1_fpr: Optional[float]
    stage2_fpr: Optional[float]
    attack_windows: int
    detected: int
    clean_windows: int
    stage1_false_positives: int
    stage2_false_positives: int
    excluded_empty: int

    def to_json(self) -> dict:
        return {
            "detection_rate": self.detection_rate,
            "false_positive_rate": self.false_positive_rate,
            "stage1_fpr": self.stage1_fpr,
            "stage2_fpr": self.stage2_fpr,
            "denominators": {
                "attack_windows": self.attack_windows,
                "clean_windows": self.clean_windows,
            },
            "counts": {
                "detected": self.detected,
                "stage1_false_positives": self.stage1_false_positives,
                "stage2_false_positives": self.stage2_false_positives,
                "excluded_empty": self.excluded_empty,
            },
        }


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def score_verdicts(verdicts: Sequence, labels: Sequence[str]) -> EvaluationMetrics:
    """
    Cross-tabulate verdicts against per-window labels.

    Detection counts attack windows marked Attacked. A clean window is a
    stage-1 false positive when Suspected or Attacked, a stage-2 false
    positive when Attacked. Windows without traffic are left out of both
    denominators; an empty denominator gives ``None``.
    """
    if len(verdicts) != len(labels):
        raise EvaluationError(f"{len(labels)} labels for {len(verdicts)} windows")
    attack = detected = clean = fp1 = fp2 = empty = 0
    for verdict, label in zip(verdicts, labels):
        if label not in LABELS:
            raise EvaluationError(f"unknown label {label!r} for window {verdict.window_index}")
        if not verdict.ne_values:
            empty += 1
            continue
        if label == "attack":
            attack += 1
            detected += verdict.state is State.ATTACKED
        else:
            clean += 1
            fp1 += verdict.state is not State.NORMAL
            fp2 += verdict.state is State.ATTACKED
    return EvaluationMetrics(
        detection_rate=_ratio(detected, attack),
        false_positive_rate=_ratio(fp1, clean),
        stage1_fpr=_ratio(fp1, clean),
        stage2_fpr=_ratio(fp2, clean),
        attack_windows=attack,
        detected=detected,
        clean_windows=clean,
        stage1_false_positives=fp1,
        stage2_false_positives=fp2,
        excluded_empty=empty,
    )


def evaluate(
    records: Iterable[FlowRecord], labels: Sequence[str], config: DetectorConfig, workers: int = 1
) -> EvaluationMetrics:
    summary = run_pipeline(records, config, workers=workers)
    return score_verdicts(summary.verdicts, labels)


def read_labels(path) -> list[str]:
    """Load a labels JSONL file ({window_index, label} per line) as a list indexed by window."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            idx, label = int(obj["window_index"]), obj["label"]
            if label not in LABELS:
                raise EvaluationError(f"line {number}: unknown label {label!r}")
            if idx in entries:
                raise EvaluationError(f"line {number}: duplicate label for window {idx}")
            entries[idx] = label
    if sorted(entries) != list(range(len(entries))):
        raise EvaluationError("label window indices are not contiguous from 0")
    return [entries[i] for i in range(len(entries))]


def write_labels(labels: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for idx, label in enumerate(labels):
            fh.write(json.dumps({"window_index": idx, "label": label}, separators=(",", ":")) + "\n")
