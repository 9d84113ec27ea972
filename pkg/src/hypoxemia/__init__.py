"""Hypoxemia severity triage toolkit.

Library and CLI covering the full workflow: rule-based vital-sign scoring,
cleaning/imputation/interpolation with synthetic-data masks, dataset assembly
for minutes-ahead severity prediction, an in-repo histogram gradient-boosted
tree learner, and the evaluation-metrics battery.
"""

__version__ = "0.1.0"

from .vitals import AgeBand, PopulationGroup, VitalKind, age_band, classify_population

__all__ = [
    "AgeBand",
    "PopulationGroup",
    "VitalKind",
    "age_band",
    "classify_population",
    "__version__",
]
