"""Detector configuration and its stable digest."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace

from .entropy import FEATURE_ORDER, FeatureKind
from .errors import ConfigError

COMBINATIONS = ("any", "all")
DEFAULT_FEATURES = (FeatureKind.SRC_ADDR, FeatureKind.DST_ADDR)


def parse_features(value) -> tuple[FeatureKind, ...]:
    """Accept a comma-separated string or an iterable of names/kinds; return them in canonical order."""
    if isinstance(value, str):
        items = [part for part in value.split(",") if part.strip()]
    else:
        items = list(value)
    kinds = {item if isinstance(item, FeatureKind) else FeatureKind.parse(item) for item in items}
    if not kinds:
        raise ConfigError("at least one feature is required")
    return tuple(sorted(kinds, key=FEATURE_ORDER.__getitem__))


@dataclass(frozen=True)
class DetectorConfig:
    """
    Parameters for the two-stage detector.

    ``th1`` applies to normalized entropy (suspect when NE < th1) and is
    base-independent. ``th2`` applies to the entropy rate (confirm when
    rate <= th2) and is expressed in units of ``log_base``.
    """

    window_duration: float = 1.0
    features: tuple[FeatureKind, ...] = DEFAULT_FEATURES
    th1: float = 0.6
    th2: float = 0.2
    log_base: float = 2.0
    block_order: int = 2
    confirmation_history: int = 5
    feature_combination: str = "any"

    def __post_init__(self):
        object.__setattr__(self, "features", parse_features(self.features))
        object.__setattr__(self, "feature_combination", str(self.feature_combination).lower())
        try:
            for name in ("window_duration", "th1", "th2", "log_base"):
                object.__setattr__(self, name, float(getattr(self, name)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"non-numeric configuration value: {exc}") from None
        if not (math.isfinite(self.window_duration) and self.window_duration > 0):
            raise ConfigError(f"window duration must be > 0, got {self.window_duration}")
        if not 0.0 <= self.th1 <= 1.0:
            raise ConfigError(f"th1 must lie in [0, 1], got {self.th1}")
        if not (math.isfinite(self.th2) and self.th2 >= 0):
            raise ConfigError(f"th2 must be >= 0, got {self.th2}")
        if not self.log_base > 1:
            raise ConfigError(f"log base must be > 1, got {self.log_base}")
        if isinstance(self.block_order, bool) or not isinstance(self.block_order, int) or self.block_order < 1:
            raise ConfigError(f"block order must be an integer >= 1, got {self.block_order!r}")
        if (
            isinstance(self.confirmation_history, bool)
            or not isinstance(self.confirmation_history, int)
            or self.confirmation_history < 1
        ):
            raise ConfigError(f"confirmation history must be an integer >= 1, got {self.confirmation_history!r}")
        if self.feature_combination not in COMBINATIONS:
            raise ConfigError(f"feature combination must be 'any' or 'all', got {self.feature_combination!r}")

    def with_thresholds(self, th1: float | None = None, th2: float | None = None) -> "DetectorConfig":
        return replace(
            self,
            th1=self.th1 if th1 is None else th1,
            th2=self.th2 if th2 is None else th2,
        )

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "features":
                value = [k.value for k in value]
            out[f.name] = value
        return out

    def digest(self, thresholds: bool = True) -> str:
        """sha256 over the canonical JSON form; ``thresholds=False`` leaves th1/th2 out."""
        doc = self.to_json()
        if not thresholds:
            doc.pop("th1")
            doc.pop("th2")
        payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# Keys accepted in JSON config files, mirroring the command-line flags.
FLAG_TO_FIELD = {
    "window_seconds": "window_duration",
    "features": "features",
    "th1": "th1",
    "th2": "th2",
    "log_base": "log_base",
    "block_order": "block_order",
    "history": "confirmation_history",
    "combine": "feature_combination",
}


def config_from_flags(values: dict, base: DetectorConfig | None = None) -> DetectorConfig:
    """Build a config from flag-named values; ``None`` entries keep the base value."""
    kwargs = {}
    for flag, value in values.items():
        name = FLAG_TO_FIELD.get(flag.replace("-", "_"))
        if name is None or value is None:
            continue
        kwargs[name] = value
    return replace(base or DetectorConfig(), **kwargs)


def config_to_flags(config: DetectorConfig) -> dict:
    return {
        "window_seconds": config.window_duration,
        "features": ",".join(k.value for k in config.features),
        "th1": config.th1,
        "th2": config.th2,
        "log_base": config.log_base,
        "block_order": config.block_order,
        "history": config.confirmation_history,
        "combine": config.feature_combination,
    }

