"""Scoring rule engine: per-vital TAG scores, severity labels, alarm runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..errors import InvalidInputError, MissingInputError
from ..vitals import AgeBand, PopulationGroup, VitalKind
from .matrix import ScoringMatrix, default_matrix


def _check_value(kind: VitalKind, value: float, domain: tuple[float, float]) -> float:
    if value is None or isinstance(value, bool):
        raise MissingInputError(f"{kind.value}: value is missing")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidInputError(f"{kind.value}: non-finite value {value!r}")
    if not domain[0] <= value <= domain[1]:
        raise InvalidInputError(
            f"{kind.value}: {value} outside sanitized domain [{domain[0]}, {domain[1]}]")
    return value


def tag_score(kind: VitalKind, value: float, band: AgeBand,
              matrix: ScoringMatrix | None = None) -> int:
    """Deviation score 0 (normal) .. 3 (severe) for one vital."""
    matrix = matrix or default_matrix()
    table = matrix.tag_tables[(band, kind)]
    return table.lookup(_check_value(kind, value, table.domain)).level


def severity_label(spo2_pct: float, group: PopulationGroup,
                   matrix: ScoringMatrix | None = None) -> int:
    """Hypoxemia severity label 0..3 from SpO2, per population group."""
    matrix = matrix or default_matrix()
    table = matrix.severity_tables[group]
    return table.lookup(_check_value(VitalKind.SPO2, spo2_pct, table.domain)).level


def tag_vector(vitals: Mapping[VitalKind | str, float], band: AgeBand,
               matrix: ScoringMatrix | None = None) -> tuple[int, int, int, int, int, int]:
    """TAG scores for all six vitals, in VitalKind declaration order.

    ``vitals`` maps VitalKind (or its column name) to a sanitized value; a
    missing or None entry raises MissingInputError (impute first).
    """
    matrix = matrix or default_matrix()
    values = {}
    for key, value in vitals.items():
        kind = key if isinstance(key, VitalKind) else VitalKind(key)
        values[kind] = value
    scores = []
    for kind in VitalKind:
        if kind not in values or values[kind] is None:
            raise MissingInputError(f"vital {kind.value} missing from record")
        scores.append(tag_score(kind, values[kind], band, matrix))
    return tuple(scores)


@dataclass(frozen=True)
class AlarmRun:
    """A maximal run of consecutive minutes sharing one nonzero TAG score."""

    vital: VitalKind
    start_minute: int
    duration_minutes: int
    score: int

    def as_dict(self) -> dict:
        return {
            "vital": self.vital.value,
            "start_minute": self.start_minute,
            "duration_minutes": self.duration_minutes,
            "score": self.score,
        }


def alarm_runs(series: Sequence[int], vital: VitalKind,
               start_minute: int = 0) -> list[AlarmRun]:
    """Run-length encode the nonzero stretches of a minute-regular TAG series.

    Adjacent minutes with the same nonzero score merge into one run; score
    changes start a new run.  Runs partition exactly the nonzero minutes.
    """
    runs: list[AlarmRun] = []
    run_start = 0
    run_score = 0
    for i, raw in enumerate(series):
        score = int(raw)
        if score == run_score:
            continue
        if run_score != 0:
            runs.append(AlarmRun(vital, start_minute + run_start, i - run_start, run_score))
        run_start, run_score = i, score
    if run_score != 0:
        runs.append(AlarmRun(vital, start_minute + run_start,
                             len(series) - run_start, run_score))
    return runs
