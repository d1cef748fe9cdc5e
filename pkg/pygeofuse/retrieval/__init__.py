# pygeofuse/retrieval/__init__.py

from .metrics import (
    ConditionMetrics,
    RetrievalReport,
    average_precision,
    mean_average_precision,
    rank_all,
    rank_gallery,
    recall_at_k,
    score_rankings,
)
from .evaluate import (
    DIRECTIONS,
    evaluate_conditions,
    parse_directions,
    read_report_csv,
    reports_frame,
    summary_table,
    write_report_csv,
    write_report_json,
)

__all__ = [
    "ConditionMetrics",
    "RetrievalReport",
    "average_precision",
    "mean_average_precision",
    "rank_all",
    "rank_gallery",
    "recall_at_k",
    "score_rankings",
    "DIRECTIONS",
    "evaluate_conditions",
    "parse_directions",
    "read_report_csv",
    "reports_frame",
    "summary_table",
    "write_report_csv",
    "write_report_json",
]
