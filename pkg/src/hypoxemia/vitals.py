"""Core vocabulary: vital kinds, age bands, population groups, value domains."""

from __future__ import annotations

import math
from enum import Enum

from .errors import InvalidInputError, UnsupportedPopulationError


class VitalKind(Enum):
    """The six primary physiological variables, in fixed scoring order."""

    RESP_RATE = "resp_rate"          # breaths/min
    SPO2 = "spo2"                    # %
    HEART_RATE = "heart_rate"        # bpm
    SBP = "sbp"                      # mmHg
    DBP = "dbp"                      # mmHg
    TEMPERATURE = "temperature"      # degrees C

    @classmethod
    def from_column(cls, name: str) -> "VitalKind":
        return cls(name)


class AgeBand(Enum):
    """Age strata of the per-vital scoring tables (total partition of age >= 0)."""

    INFANT_0_11M = "infant_0_11m"            # [0, 1) years
    TODDLER_12_23M = "toddler_12_23m"        # [1, 2)
    CHILD_2_4Y = "child_2_4y"                # [2, 5)
    CHILD_5_11Y = "child_5_11y"              # [5, 12)
    ADOLESCENT_12_17Y = "adolescent_12_17y"  # [12, 18)
    ADULT_18PLUS = "adult"                   # [18, inf)


class PopulationGroup(Enum):
    """Severity-labelling populations. Pediatric COPD is unrepresentable."""

    ADULT_NO_COPD = "adult_no_copd"
    ADULT_COPD = "adult_copd"
    PEDIATRIC_NO_COPD = "pediatric_no_copd"


# Half-open lower boundaries, in years, matching AgeBand declaration order.
_AGE_EDGES = (0.0, 1.0, 2.0, 5.0, 12.0, 18.0)

# Plausibility bounds: values outside are treated as recording errors.
SANITIZE_RANGES: dict[VitalKind, tuple[float, float]] = {
    VitalKind.RESP_RATE: (0.0, 300.0),
    VitalKind.SPO2: (0.0, 100.0),
    VitalKind.HEART_RATE: (0.0, 300.0),
    VitalKind.SBP: (0.0, 300.0),
    VitalKind.DBP: (0.0, 300.0),
    VitalKind.TEMPERATURE: (0.0, 60.0),
}

#: Decimal resolution of the published threshold tables, per vital.
TABLE_STEP: dict[VitalKind, float] = {
    VitalKind.RESP_RATE: 1.0,
    VitalKind.SPO2: 1.0,
    VitalKind.HEART_RATE: 1.0,
    VitalKind.SBP: 1.0,
    VitalKind.DBP: 1.0,
    VitalKind.TEMPERATURE: 0.1,
}


def age_band(age_years: float) -> AgeBand:
    """Return the unique age band containing ``age_years``.

    Raises InvalidInputError for negative or non-finite ages.
    """
    if age_years is None or not math.isfinite(age_years) or age_years < 0:
        raise InvalidInputError(f"age must be a finite non-negative number, got {age_years!r}")
    bands = list(AgeBand)
    for i in range(len(_AGE_EDGES) - 1, -1, -1):
        if age_years >= _AGE_EDGES[i]:
            return bands[i]
    raise InvalidInputError(f"age {age_years!r} outside all bands")  # pragma: no cover


def classify_population(age_years: float, copd: bool) -> PopulationGroup:
    """Map (age, COPD flag) to a severity-labelling population.

    Pediatric COPD has no defined thresholds and raises
    UnsupportedPopulationError.
    """
    band = age_band(age_years)  # validates the age
    adult = band is AgeBand.ADULT_18PLUS
    if adult:
        return PopulationGroup.ADULT_COPD if copd else PopulationGroup.ADULT_NO_COPD
    if copd:
        raise UnsupportedPopulationError(
            f"no severity thresholds for pediatric COPD (age {age_years})"
        )
    return PopulationGroup.PEDIATRIC_NO_COPD
