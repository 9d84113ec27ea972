"""Cleaning, inclusion filtering, minute-grid interpolation and masks.

Raw per-admission records arrive as CSV rows (one per charttime, possibly
duplicated/irregular).  The pipeline merges duplicate charttimes, nulls
implausible measurements, applies the admission inclusion filters, and
finally interpolates every admission onto a one-minute grid while tracking
which cells are synthetic.  Admissions are independent units of work.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import InsufficientDataError, InvalidInputError, SchemaError
from .vitals import SANITIZE_RANGES, VitalKind

ID_COLUMNS = ["subject_id", "hadm_id", "charttime"]
VITAL_COLUMNS = [k.value for k in VitalKind]
NUMERIC_FEATURES = VITAL_COLUMNS + ["age", "height", "weight"]
CATEGORICAL_FEATURES = ["gender", "race", "copd"]
FEATURE_COLUMNS = (["heart_rate", "resp_rate", "spo2", "sbp", "dbp", "temperature",
                    "age", "gender", "height", "weight", "race", "copd"])
INPUT_COLUMNS = ["subject_id", "hadm_id", "charttime", "heart_rate", "resp_rate",
                 "spo2", "sbp", "dbp", "temperature", "age", "gender", "height",
                 "weight", "race", "copd"]

# Columns interpolated onto the minute grid (masks tracked per cell); the
# remaining demographics are held constant within an admission.
INTERPOLATED_COLUMNS = VITAL_COLUMNS + ["height", "weight", "map", "bmi"]
CONSTANT_COLUMNS = ["age", "gender", "race", "copd"]

ROW_MISSING_THRESHOLD = 0.76       # drop rows with >= 76% missing features
ADMISSION_NONMISSING_MIN = 0.8645  # keep admissions with >= 86.45% observed cells
MAX_GAP_MINUTES = 60
MIN_ROWS = 30

_INTEGER_ROUND = ["resp_rate", "heart_rate", "sbp", "dbp", "spo2"]
_DECIMAL_ROUND = ["temperature", "map", "bmi", "weight", "height"]


# -- report -------------------------------------------------------------------

@dataclass
class PipelineReport:
    """Per-stage drop counts plus dataset context gathered along the way."""

    stages: list[dict] = field(default_factory=list)
    missingness_fraction: float | None = None
    label_distribution: dict | None = None
    label_durations: dict | None = None
    derived_consistency: dict | None = None

    def add_stage(self, name: str, admissions_in: int, admissions_out: int,
                  rows_in: int, rows_out: int) -> None:
        self.stages.append({
            "name": name,
            "admissions_in": admissions_in,
            "admissions_out": admissions_out,
            "rows_in": rows_in,
            "rows_out": rows_out,
        })

    def merge(self, other: "PipelineReport") -> "PipelineReport":
        """Commutative combination of per-admission partial reports."""
        merged = PipelineReport()
        names = {s["name"] for s in self.stages} | {s["name"] for s in other.stages}
        for name in sorted(names):
            rows = [s for s in self.stages + other.stages if s["name"] == name]
            merged.stages.append({
                "name": name,
                "admissions_in": sum(r["admissions_in"] for r in rows),
                "admissions_out": sum(r["admissions_out"] for r in rows),
                "rows_in": sum(r["rows_in"] for r in rows),
                "rows_out": sum(r["rows_out"] for r in rows),
            })
        return merged

    def as_dict(self) -> dict:
        return {
            "stages": self.stages,
            "missingness_fraction": self.missingness_fraction,
            "label_distribution": self.label_distribution,
            "label_durations": self.label_durations,
            "derived_consistency": self.derived_consistency,
        }


# -- loading ------------------------------------------------------------------

def load_records(path) -> pd.DataFrame:
    """Read the documented input CSV; empty fields are missing values.

    Charttimes must be ISO 8601 at minute resolution; nonzero seconds (or
    finer) are an input error.
    """
    df = pd.read_csv(path, dtype={"subject_id": str, "hadm_id": str}, comment="#")
    missing_cols = [c for c in INPUT_COLUMNS if c not in df.columns]
    if missing_cols:
        raise SchemaError(f"input CSV missing columns: {missing_cols}")
    if df["subject_id"].isna().any() or df["hadm_id"].isna().any():
        raise SchemaError("subject_id/hadm_id must be non-empty")
    try:
        df["charttime"] = pd.to_datetime(df["charttime"], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"unparseable charttime: {exc}") from exc
    sub_minute = (df["charttime"].dt.second != 0) | (df["charttime"].dt.microsecond != 0)
    if sub_minute.any():
        bad = df.index[sub_minute][:5].tolist()
        raise SchemaError(f"charttime has sub-minute components at rows {bad}")
    for col in NUMERIC_FEATURES:
        df[col] = pd.to_numeric(df[col], errors="raise")
    df["copd"] = df["copd"].map(_parse_copd)
    return df


def _parse_copd(value):
    if pd.isna(value):
        return np.nan
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("1", "true", "yes"):
            return 1.0
        if v in ("0", "false", "no"):
            return 0.0
        raise SchemaError(f"bad copd flag {value!r}")
    return float(bool(value))


def split_admissions(df: pd.DataFrame) -> dict[str, pd.DataFrame]:
    """Index the cohort by admission, preserving input row order within each."""
    return {hadm: g.reset_index(drop=True)
            for hadm, g in df.groupby("hadm_id", sort=True)}


# -- per-admission cleaning ----------------------------------------------------

def merge_same_charttime(records: pd.DataFrame) -> pd.DataFrame:
    """Collapse rows sharing a charttime into one row per charttime.

    For each column the last non-null occurrence in input order wins, so
    redundant duplicated rows keep only their most recent version.
    """
    if records["hadm_id"].nunique() > 1:
        raise InvalidInputError(
            f"mixed admission ids: {sorted(records['hadm_id'].unique())}")
    merged = (records.groupby("charttime", sort=True)
              .agg(lambda s: s.dropna().iloc[-1] if s.notna().any() else np.nan))
    merged = merged.reset_index()
    return merged[[c for c in records.columns if c in merged.columns]]


def sanitize(series: pd.DataFrame,
             ranges: dict[VitalKind, tuple[float, float]] | None = None) -> pd.DataFrame:
    """Null out implausible vital measurements (idempotent)."""
    ranges = ranges or SANITIZE_RANGES
    out = series.copy()
    for kind, (lo, hi) in ranges.items():
        col = kind.value
        if col not in out.columns:
            continue
        vals = out[col].to_numpy(dtype=float, copy=False)
        bad = ~np.isnan(vals) & ((vals < lo) | (vals > hi))
        if bad.any():
            out.loc[bad, col] = np.nan
    return out


# -- inclusion filters ----------------------------------------------------------

def _row_missing_fraction(df: pd.DataFrame) -> np.ndarray:
    cols = [c for c in FEATURE_COLUMNS if c in df.columns]
    return df[cols].isna().to_numpy().mean(axis=1)


def _admission_nonmissing_fraction(df: pd.DataFrame) -> float:
    cols = [c for c in FEATURE_COLUMNS if c in df.columns]
    return float(1.0 - df[cols].isna().to_numpy().mean())


def _max_gap_minutes(df: pd.DataFrame) -> float:
    if len(df) < 2:
        return 0.0
    diffs = df["charttime"].sort_values().diff().dropna()
    return float(diffs.max().total_seconds() / 60.0)


def filter_admissions(cohort: dict[str, pd.DataFrame],
                      report: PipelineReport | None = None
                      ) -> tuple[dict[str, pd.DataFrame], PipelineReport]:
    """Apply the admission inclusion filters, in fixed stage order.

    Stages: drop rows >= 76% missing; drop admissions with < 30 charttimes;
    keep admissions >= 86.45% observed; drop admissions with any > 60 minute
    gap between successive rows; drop admissions with < 30 rows.  Running the
    filter twice equals running it once.
    """
    report = report or PipelineReport()

    def _count(c):
        return len(c), int(sum(len(df) for df in c.values()))

    # stage: sparse rows
    a_in, r_in = _count(cohort)
    cohort = {h: df.loc[_row_missing_fraction(df) < ROW_MISSING_THRESHOLD]
              .reset_index(drop=True) for h, df in cohort.items()}
    cohort = {h: df for h, df in cohort.items() if len(df) > 0}
    a_out, r_out = _count(cohort)
    report.add_stage("drop_sparse_rows", a_in, a_out, r_in, r_out)

    # stage: minimum charttimes (pre-filter length check)
    a_in, r_in = a_out, r_out
    cohort = {h: df for h, df in cohort.items()
              if df["charttime"].nunique() >= MIN_ROWS}
    a_out, r_out = _count(cohort)
    report.add_stage("min_charttimes", a_in, a_out, r_in, r_out)

    # stage: admission observed-fraction
    a_in, r_in = a_out, r_out
    cohort = {h: df for h, df in cohort.items()
              if _admission_nonmissing_fraction(df) >= ADMISSION_NONMISSING_MIN}
    a_out, r_out = _count(cohort)
    report.add_stage("min_nonmissing_fraction", a_in, a_out, r_in, r_out)

    # stage: maximum gap between successive rows
    a_in, r_in = a_out, r_out
    cohort = {h: df for h, df in cohort.items()
              if _max_gap_minutes(df) <= MAX_GAP_MINUTES}
    a_out, r_out = _count(cohort)
    report.add_stage("max_gap", a_in, a_out, r_in, r_out)

    # stage: minimum rows (post-filter length check)
    a_in, r_in = a_out, r_out
    cohort = {h: df for h, df in cohort.items() if len(df) >= MIN_ROWS}
    a_out, r_out = _count(cohort)
    report.add_stage("min_rows", a_in, a_out, r_in, r_out)

    return cohort, report


def preprocess(df: pd.DataFrame) -> tuple[dict[str, pd.DataFrame], PipelineReport]:
    """Merge duplicate charttimes, sanitize, and filter the whole cohort."""
    report = PipelineReport()
    cohort = split_admissions(df)
    a_in = len(cohort)
    r_in = int(sum(len(v) for v in cohort.values()))
    cohort = {h: sanitize(merge_same_charttime(adm)) for h, adm in cohort.items()}
    r_out = int(sum(len(v) for v in cohort.values()))
    report.add_stage("merge_and_sanitize", a_in, len(cohort), r_in, r_out)
    cohort, report = filter_admissions(cohort, report)
    if cohort:
        pooled = pd.concat(cohort.values(), ignore_index=True)
        report.missingness_fraction = float(
            pooled[[c for c in FEATURE_COLUMNS if c in pooled.columns]]
            .isna().to_numpy().mean())
    return cohort, report


# -- derived measurements --------------------------------------------------------

def derive_map(sbp, dbp):
    """Mean arterial pressure (sbp + 2*dbp) / 3; missing inputs stay missing."""
    return (np.asarray(sbp, dtype=float) + 2.0 * np.asarray(dbp, dtype=float)) / 3.0


def derive_bmi(weight_kg: float, height_cm: float) -> float:
    """Body mass index from weight (kg) and height (cm)."""
    if height_cm is None or not height_cm > 0:
        raise InvalidInputError(f"height must be positive, got {height_cm!r}")
    return float(weight_kg) / (float(height_cm) / 100.0) ** 2


def add_derived_columns(df: pd.DataFrame) -> pd.DataFrame:
    """Attach map/bmi columns computed row-wise (NaN where inputs missing)."""
    out = df.copy()
    out["map"] = derive_map(out["sbp"], out["dbp"])
    height = out["height"].to_numpy(dtype=float)
    weight = out["weight"].to_numpy(dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        bmi = weight / (height / 100.0) ** 2
    bmi = np.where(np.isfinite(bmi), bmi, np.nan)
    out["bmi"] = bmi
    return out


def derived_consistency(frame: pd.DataFrame) -> dict:
    """Max absolute gap between interpolated map/bmi and re-derived values."""
    out = {}
    if {"map", "sbp", "dbp"} <= set(frame.columns):
        rederived = derive_map(frame["sbp"], frame["dbp"])
        out["map_max_abs_diff"] = float(np.nanmax(
            np.abs(frame["map"].to_numpy(dtype=float) - rederived), initial=0.0))
    if {"bmi", "weight", "height"} <= set(frame.columns):
        h = frame["height"].to_numpy(dtype=float)
        w = frame["weight"].to_numpy(dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            rederived = w / (h / 100.0) ** 2
        diff = np.abs(frame["bmi"].to_numpy(dtype=float) - rederived)
        out["bmi_max_abs_diff"] = float(np.nanmax(diff, initial=0.0))
    return out


# -- minute-grid interpolation ----------------------------------------------------

def minute_offsets(charttimes: pd.Series) -> np.ndarray:
    t0 = charttimes.iloc[0]
    return ((charttimes - t0).dt.total_seconds() / 60.0).round().astype(int).to_numpy()


def interpolate_minutes(series: pd.DataFrame,
                        cell_masks: pd.DataFrame | None = None) -> pd.DataFrame:
    """Linearly interpolate an admission onto its one-minute grid.

    Requires >= 2 charttimes and no missing cells in the interpolated columns
    (impute first).  Original rows keep their values bit-exact with cell mask
    0 (or the imputation mask passed in ``cell_masks``); inserted rows get
    charttime mask 1 and cell masks 1.  Demographics are held constant.
    """
    if len(series) < 2:
        raise InsufficientDataError(
            f"admission has {len(series)} charttimes; need at least 2 to interpolate")
    order = np.argsort(series["charttime"].to_numpy(), kind="stable")
    series = series.iloc[order].reset_index(drop=True)
    if cell_masks is not None:
        # cell_masks rows correspond positionally to the series rows
        cell_masks = cell_masks.iloc[order].reset_index(drop=True)
    cols = [c for c in INTERPOLATED_COLUMNS if c in series.columns]
    for col in cols:
        if series[col].isna().any():
            raise InvalidInputError(f"column {col} still has missing cells; impute first")

    offsets = minute_offsets(series["charttime"])
    if len(np.unique(offsets)) != len(offsets):
        raise InvalidInputError("duplicate charttimes; merge_same_charttime first")
    grid = np.arange(offsets[-1] + 1)
    t0 = series["charttime"].iloc[0]

    out = pd.DataFrame({"charttime": t0 + pd.to_timedelta(grid, unit="min")})
    out["subject_id"] = series["subject_id"].iloc[0]
    out["hadm_id"] = series["hadm_id"].iloc[0]

    is_knot = np.zeros(len(grid), dtype=bool)
    is_knot[offsets] = True

    for col in cols:
        knots = series[col].to_numpy(dtype=float)
        values = np.interp(grid, offsets, knots)
        values[offsets] = knots  # knots preserved bit-exact
        out[col] = values
        base_mask = np.zeros(len(series), dtype=np.int8)
        if cell_masks is not None and col in cell_masks.columns:
            base_mask = cell_masks[col].to_numpy(dtype=np.int8)
        mask = np.ones(len(grid), dtype=np.int8)
        mask[offsets] = base_mask
        out[f"mask_{col}"] = mask

    for col in CONSTANT_COLUMNS:
        if col in series.columns:
            out[col] = series[col].iloc[0]

    out["mask_charttime"] = (~is_knot).astype(np.int8)
    ordered = (["subject_id", "hadm_id", "charttime"]
               + [c for c in CONSTANT_COLUMNS if c in out.columns]
               + cols + [f"mask_{c}" for c in cols] + ["mask_charttime"])
    return out[ordered]


def cubic_spline_reference(series: pd.DataFrame, column: str) -> np.ndarray:
    """Cubic-spline interpolation of one column onto the minute grid.

    Reference comparator only: unlike the linear path it can overshoot the
    bracketing-knot hull and produce implausible values.
    """
    from scipy.interpolate import CubicSpline

    series = series.sort_values("charttime").reset_index(drop=True)
    offsets = minute_offsets(series["charttime"])
    grid = np.arange(offsets[-1] + 1)
    return CubicSpline(offsets, series[column].to_numpy(dtype=float))(grid)


# -- rounding ----------------------------------------------------------------------

def round_half_away(values, decimals: int = 0):
    """Round half away from zero (ties like 92.5 go up, -92.5 down)."""
    arr = np.asarray(values, dtype=float)
    factor = 10.0 ** decimals
    return np.sign(arr) * np.floor(np.abs(arr) * factor + 0.5) / factor


def round_values(frame: pd.DataFrame) -> pd.DataFrame:
    """Standardize precision: counts/pressures/saturation to integers,
    temperature and body metrics to one decimal."""
    out = frame.copy()
    for col in _INTEGER_ROUND:
        if col in out.columns:
            out[col] = round_half_away(out[col], 0)
    for col in _DECIMAL_ROUND:
        if col in out.columns:
            out[col] = round_half_away(out[col], 1)
    return out


# -- label run statistics ------------------------------------------------------------

def run_lengths(values) -> list[tuple[int, int]]:
    """Run-length encode a sequence into (value, length) pairs."""
    runs = []
    prev = None
    count = 0
    for v in values:
        v = int(v)
        if v == prev:
            count += 1
        else:
            if prev is not None:
                runs.append((prev, count))
            prev, count = v, 1
    if prev is not None:
        runs.append((prev, count))
    return runs


def label_duration_stats(labels) -> dict[int, dict]:
    """Mean/median run duration (minutes) per label value."""
    durations: dict[int, list[int]] = {}
    for value, length in run_lengths(labels):
        durations.setdefault(value, []).append(length)
    return {
        value: {
            "mean": float(np.mean(lengths)),
            "median": float(np.median(lengths)),
            "runs": len(lengths),
        }
        for value, lengths in sorted(durations.items())
    }


def label_distribution(labels) -> dict[int, float]:
    """Percentage of rows per label value."""
    arr = np.asarray(labels, dtype=int)
    if arr.size == 0:
        return {}
    values, counts = np.unique(arr, return_counts=True)
    return {int(v): float(100.0 * c / arr.size) for v, c in zip(values, counts)}
