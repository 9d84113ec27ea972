"""Model-ready dataset assembly: feature schema, shift-lag targets, sliding
windows, padded sequence segments, patient-wise splits and class weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DegenerateClassError, InvalidInputError, SchemaError
from .scoring.matrix import ScoringMatrix, default_matrix
from .vitals import AgeBand, PopulationGroup, VitalKind, age_band, classify_population

# -- feature schema -------------------------------------------------------------

LABEL_COLUMN = "hypoxemia_severity_score"

DEMOGRAPHIC_FEATURES = ["gender", "age", "weight", "height", "bmi"]
VITAL_FEATURES = ["sbp", "dbp", "map", "temperature", "heart_rate", "resp_rate", "spo2"]

# One-hot race columns. "white" (the majority category) is the dropped
# baseline so the flat feature count stays at 41; "undefined" is explicit.
RACE_BASELINE = "white"
RACE_CATEGORIES = [
    "undefined",
    "black_african_american",
    "hispanic_latino",
    "asian",
    "american_indian_alaska_native",
    "native_hawaiian_pacific_islander",
    "multiracial",
]
RACE_FEATURES = [f"race_{c}" for c in RACE_CATEGORIES]

TAG_SOURCE_ORDER = ["heart_rate", "temperature", "spo2", "dbp", "sbp", "resp_rate"]
TAG_FEATURES = [f"TAG_{c}" for c in TAG_SOURCE_ORDER]

MASK_SOURCE_ORDER = ["spo2", "sbp", "dbp", "resp_rate", "temperature", "bmi",
                     "heart_rate", "map", "height", "weight"]
MASK_FEATURES = ([f"mask_{c}" for c in MASK_SOURCE_ORDER]
                 + [f"mask_TAG_{c}" for c in TAG_SOURCE_ORDER])

GBM_FEATURES = (DEMOGRAPHIC_FEATURES + VITAL_FEATURES + RACE_FEATURES
                + TAG_FEATURES + MASK_FEATURES)          # 41 columns

SEQUENCE_PASSTHROUGH = ["subject_id", "hadm_id", "charttime", "mask_charttime"]

STANDARDIZED_FEATURES = (["age", "weight", "height", "bmi"] + VITAL_FEATURES
                         + TAG_FEATURES)

_GENDER_CODES = {"f": 0.0, "female": 0.0, "m": 1.0, "male": 1.0}

DEFAULT_LAG_MINUTES = 5
DEFAULT_WINDOW_WIDTH = 5
DEFAULT_SEQUENCE_LENGTH = 1024
DEFAULT_PAD_VALUE = 1000.0


def normalize_race(value) -> str:
    """Canonicalize a free-text race/ethnicity string; unknowns are undefined."""
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "undefined"
    key = str(value).strip().lower().replace("/", " ").replace("-", " ")
    key = "_".join(key.split())
    if key in ("", "unknown", "other", "not_specified", "undefined"):
        return "undefined"
    if key in RACE_CATEGORIES or key == RACE_BASELINE:
        return key
    aliases = {
        "black": "black_african_american",
        "african_american": "black_african_american",
        "black_african_american": "black_african_american",
        "hispanic": "hispanic_latino",
        "latino": "hispanic_latino",
        "american_indian": "american_indian_alaska_native",
        "alaska_native": "american_indian_alaska_native",
        "native_hawaiian": "native_hawaiian_pacific_islander",
        "pacific_islander": "native_hawaiian_pacific_islander",
        "native_hawaiian_other_pacific_islander": "native_hawaiian_pacific_islander",
    }
    return aliases.get(key, "undefined")


def encode_gender(value) -> float:
    try:
        return _GENDER_CODES[str(value).strip().lower()]
    except KeyError:
        raise SchemaError(f"unrecognized gender value {value!r}") from None


# -- assembly ---------------------------------------------------------------------

def severity_labels_for(frame: pd.DataFrame,
                        matrix: ScoringMatrix | None = None) -> np.ndarray:
    """Severity label per row from the spo2/age/copd columns."""
    matrix = matrix or default_matrix()
    ages = frame["age"].to_numpy(dtype=float)
    copd = frame["copd"].to_numpy(dtype=float) > 0
    spo2 = frame["spo2"].to_numpy(dtype=float)
    groups = np.array([classify_population(a, bool(c)).value
                       for a, c in zip(ages, copd)])
    labels = np.zeros(len(frame), dtype=np.int64)
    for group in np.unique(groups):
        sel = groups == group
        table = matrix.severity_tables[PopulationGroup(group)]
        labels[sel] = table.lookup_levels(spo2[sel])
    return labels


def assemble_features(frame: pd.DataFrame,
                      matrix: ScoringMatrix | None = None) -> pd.DataFrame:
    """Build the flat training table from an interpolated masked frame.

    Appends the six TAG score columns (and their masks, mirroring the source
    vital's mask), the severity label, race one-hots and encoded gender, and
    returns identifiers plus the 41 schema features plus the label.
    """
    matrix = matrix or default_matrix()
    required = set(
        ["subject_id", "hadm_id", "charttime", "age", "gender", "race", "copd"]
        + VITAL_FEATURES + ["height", "weight", "mask_charttime"]
        + [f"mask_{c}" for c in MASK_SOURCE_ORDER])
    missing = sorted(required - set(frame.columns))
    if missing:
        raise InvalidInputError(f"masked frame missing columns: {missing}")

    out = frame.copy()
    ages = out["age"].to_numpy(dtype=float)
    bands = np.array([age_band(a).value for a in ages])

    # TAG scores per vital, computed band-wise with the normalized tables
    for col in TAG_SOURCE_ORDER:
        kind = VitalKind(col)
        values = out[col].to_numpy(dtype=float)
        tags = np.zeros(len(out), dtype=np.int64)
        for band in np.unique(bands):
            sel = bands == band
            table = matrix.tag_tables[(AgeBand(band), kind)]
            tags[sel] = table.lookup_levels(values[sel])
        out[f"TAG_{col}"] = tags
        out[f"mask_TAG_{col}"] = out[f"mask_{col}"].astype(np.int8)

    out[LABEL_COLUMN] = severity_labels_for(out, matrix)

    out["gender"] = out["gender"].map(encode_gender)
    race = out["race"].map(normalize_race)
    for cat in RACE_CATEGORIES:
        out[f"race_{cat}"] = (race == cat).astype(np.int8)

    columns = ["subject_id", "hadm_id", "charttime", "mask_charttime"]
    columns += GBM_FEATURES + [LABEL_COLUMN]
    return out[columns]


def gbm_table(assembled: pd.DataFrame) -> pd.DataFrame:
    """The 41 feature columns plus label, identifiers stripped."""
    return assembled[GBM_FEATURES + [LABEL_COLUMN]].copy()


# -- shift-lag ---------------------------------------------------------------------

def shift_labels(labels, lag_minutes: int = DEFAULT_LAG_MINUTES) -> np.ndarray:
    """Label sequence shifted so row t carries the label of row t+lag.

    The final ``lag`` rows have no future label and are dropped; sequences
    shorter than the lag yield an empty array.
    """
    if lag_minutes < 1:
        raise InvalidInputError("lag must be a positive number of minutes")
    arr = np.asarray(labels)
    if len(arr) <= lag_minutes:
        return arr[:0]
    return arr[lag_minutes:]


def apply_shift_lag(assembled: pd.DataFrame, lag_minutes: int = DEFAULT_LAG_MINUTES,
                    label_column: str = LABEL_COLUMN,
                    admission_column: str = "hadm_id") -> pd.DataFrame:
    """Shift labels per admission, never across admission boundaries."""
    parts = []
    for _, group in assembled.groupby(admission_column, sort=True):
        if len(group) <= lag_minutes:
            continue
        part = group.iloc[:-lag_minutes].copy()
        part[label_column] = group[label_column].to_numpy()[lag_minutes:]
        parts.append(part)
    if not parts:
        return assembled.iloc[:0].copy()
    return pd.concat(parts, ignore_index=True)


# -- sliding windows -----------------------------------------------------------------

@dataclass
class WindowBatch:
    """Overlapping fixed-width windows with one target per window."""

    features: np.ndarray    # (n_windows, width, n_features)
    targets: np.ndarray     # (n_windows,)
    width: int
    stride: int = 1


def sliding_windows(features: np.ndarray, labels: np.ndarray,
                    width: int = DEFAULT_WINDOW_WIDTH, stride: int = 1) -> WindowBatch:
    """Windows of ``width`` consecutive rows; target = label at the last row.

    Consecutive windows overlap by ``width - stride`` rows.
    """
    features = np.asarray(features)
    labels = np.asarray(labels)
    if len(features) != len(labels):
        raise InvalidInputError("features and labels must align row-wise")
    n = len(features)
    if n < width:
        return WindowBatch(np.empty((0, width) + features.shape[1:]),
                           labels[:0], width, stride)
    starts = np.arange(0, n - width + 1, stride)
    stacked = np.stack([features[s:s + width] for s in starts])
    targets = labels[starts + width - 1]
    return WindowBatch(stacked, targets, width, stride)


# -- padded sequence segments ----------------------------------------------------------

@dataclass
class PaddedSequence:
    """A fixed-length segment; pad rows carry the pad value and validity 0."""

    values: np.ndarray      # (target_len, n_features)
    validity: np.ndarray    # (target_len,) 1 for real rows, 0 for padding
    n_real: int


def pad_and_segment(rows: np.ndarray, target_len: int = DEFAULT_SEQUENCE_LENGTH,
                    pad_value: float = DEFAULT_PAD_VALUE) -> list[PaddedSequence]:
    """Split an admission into ceil(L / target_len) fixed-length segments."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise InvalidInputError("expected a 2-D row block")
    if len(rows) == 0:
        return []
    segments = []
    for start in range(0, len(rows), target_len):
        chunk = rows[start:start + target_len]
        n_real = len(chunk)
        if n_real < target_len:
            pad = np.full((target_len - n_real, rows.shape[1]), pad_value)
            chunk = np.vstack([chunk, pad])
        validity = np.zeros(target_len, dtype=np.int8)
        validity[:n_real] = 1
        segments.append(PaddedSequence(chunk, validity, n_real))
    return segments


# -- standardization ------------------------------------------------------------------

@dataclass
class Standardization:
    """Train-split feature means/stds (std 1 where a feature has no variance)."""

    means: dict[str, float]
    stds: dict[str, float]
    zero_variance: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"means": self.means, "stds": self.stds,
                "zero_variance": self.zero_variance}


def compute_standardization(train: pd.DataFrame,
                            columns: list[str] | None = None) -> Standardization:
    columns = [c for c in (columns or STANDARDIZED_FEATURES) if c in train.columns]
    means, stds, flat = {}, {}, []
    for col in columns:
        vals = train[col].to_numpy(dtype=float)
        mean = float(vals.mean())
        std = float(vals.std(ddof=0))
        if std == 0.0:
            flat.append(col)
            std = 1.0
        means[col], stds[col] = mean, std
    return Standardization(means, stds, flat)


def apply_standardization(frame: pd.DataFrame, stats: Standardization) -> pd.DataFrame:
    """Z-score with TRAIN statistics (mask/one-hot columns untouched)."""
    out = frame.copy()
    for col, mean in stats.means.items():
        if col in out.columns:
            out[col] = (out[col].to_numpy(dtype=float) - mean) / stats.stds[col]
    return out


# -- patient-wise splitting --------------------------------------------------------------

@dataclass
class SplitAssignment:
    assignment: dict[str, str]      # subject_id -> train | validation | test
    fractions: tuple[float, float, float]
    seed: int

    def subjects(self, split: str) -> list[str]:
        return sorted(s for s, v in self.assignment.items() if v == split)

    def counts(self) -> dict[str, int]:
        out = {"train": 0, "validation": 0, "test": 0}
        for v in self.assignment.values():
            out[v] += 1
        return out

    def as_dict(self) -> dict:
        return {"seed": self.seed, "fractions": list(self.fractions),
                "assignment": dict(sorted(self.assignment.items()))}


def split_patients(subject_ids, fractions=(0.75, 0.125, 0.125),
                   seed: int = 42) -> SplitAssignment:
    """Deterministic patient-level split; every patient lands in exactly one set.

    Validation/test sizes are the fractions rounded to the nearest patient
    (so each set stays within one patient of its nominal share); the
    remainder goes to train.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ConfigError(f"split fractions must be 3 non-negatives summing to 1: {fractions}")
    ids = sorted({str(s) for s in subject_ids})
    if not ids:
        raise InvalidInputError("no subject ids to split")
    rng = np.random.default_rng(seed)
    perm = [ids[i] for i in rng.permutation(len(ids))]
    n = len(ids)
    n_val = int(np.floor(fractions[1] * n + 0.5))
    n_test = int(np.floor(fractions[2] * n + 0.5))
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ConfigError("split fractions leave no room for a training set")
    assignment = {}
    for i, sid in enumerate(perm):
        if i < n_train:
            assignment[sid] = "train"
        elif i < n_train + n_val:
            assignment[sid] = "validation"
        else:
            assignment[sid] = "test"
    return SplitAssignment(assignment, fractions, seed)


# -- class weights ---------------------------------------------------------------------

def class_weights(labels, n_classes: int = 4) -> np.ndarray:
    """w_c = N / (K * n_c): inversely proportional to class frequency."""
    arr = np.asarray(labels, dtype=int)
    counts = np.bincount(arr, minlength=n_classes)
    if arr.size == 0 or (counts[:n_classes] == 0).any():
        raise DegenerateClassError(
            f"every class in 0..{n_classes - 1} must be present, got counts "
            f"{counts[:n_classes].tolist()}")
    return arr.size / (n_classes * counts[:n_classes].astype(float))
