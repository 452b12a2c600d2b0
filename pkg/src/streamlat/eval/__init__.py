from .metrics import (
    MatchConfig,
    MetricsReport,
    average_precision,
    build_report,
    composite_score,
    match_frame,
    summary_csv,
    tp_errors,
)
from .streaming import EvalConfig, offline_evaluate, stream_matches, streaming_evaluate

__all__ = [
    "EvalConfig",
    "MatchConfig",
    "MetricsReport",
    "average_precision",
    "build_report",
    "composite_score",
    "match_frame",
    "offline_evaluate",
    "stream_matches",
    "streaming_evaluate",
    "summary_csv",
    "tp_errors",
]
