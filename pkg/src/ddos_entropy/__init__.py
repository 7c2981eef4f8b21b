"""Entropy-based two-stage DDoS detection over flow traces."""

from .alerts import AdvisoryReport, Alert, AlertLog, build_advisory_report, emit_alert, notify_client
from .calibration import (
    BaselineProfile,
    EvaluationMetrics,
    build_baseline,
    calibrate,
    calibrate_threshold,
    evaluate,
)
from .config import DetectorConfig
from .entropy import (
    EntropyReport,
    FeatureDistribution,
    FeatureKind,
    build_distribution,
    entropy_rate,
    in_degree_distribution,
    normalized_entropy,
    shannon_entropy,
)
from .errors import (
    AlertSinkError,
    CalibrationError,
    ConfigError,
    DetectorError,
    EvaluationError,
    InsufficientDataError,
    NoDominantFlowError,
    OrderingError,
    ParseError,
)
from .flows import FlowKey, FlowRecord, TrafficWindow, group_by_flow_key, parse_flow_record, windowize
from .pipeline import (
    PipelineSummary,
    State,
    WindowVerdict,
    identify_dominant_flow,
    run_pipeline,
    stage1_detect,
    stage2_confirm,
)
from .traffic_gen import AttackParams, LegitParams, gen_ddos, gen_legitimate, mix, standard_scenario

__version__ = "0.1.0"
