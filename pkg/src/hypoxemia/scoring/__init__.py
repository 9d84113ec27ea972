from .bands import MatrixAnomaly, NormalizationReport, NormalizedTable, RawBand, SeverityBin
from .engine import AlarmRun, alarm_runs, severity_label, tag_score, tag_vector
from .matrix import ScoringMatrix, default_matrix

__all__ = [
    "AlarmRun",
    "MatrixAnomaly",
    "NormalizationReport",
    "NormalizedTable",
    "RawBand",
    "ScoringMatrix",
    "SeverityBin",
    "alarm_runs",
    "default_matrix",
    "severity_label",
    "tag_score",
    "tag_vector",
]
