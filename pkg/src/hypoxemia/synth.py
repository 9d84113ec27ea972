"""Synthetic cohort generator.

Real bedside data cannot be redistributed, so documentation examples, tests
and the end-to-end smoke run operate on generated patients: sinusoid-plus-AR
noise vitals with injected desaturation episodes, configurable missingness,
occasional implausible outliers and duplicated charttimes.  Fully
deterministic for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .pipeline import INPUT_COLUMNS
from .vitals import AgeBand, age_band

_BASELINES = {
    AgeBand.INFANT_0_11M: dict(resp_rate=40, spo2=97.5, heart_rate=135, sbp=85, dbp=46, temperature=36.5),
    AgeBand.TODDLER_12_23M: dict(resp_rate=32, spo2=97.5, heart_rate=125, sbp=85, dbp=52, temperature=36.5),
    AgeBand.CHILD_2_4Y: dict(resp_rate=27, spo2=97.5, heart_rate=115, sbp=105, dbp=55, temperature=36.5),
    AgeBand.CHILD_5_11Y: dict(resp_rate=25, spo2=97.5, heart_rate=105, sbp=100, dbp=65, temperature=36.5),
    AgeBand.ADOLESCENT_12_17Y: dict(resp_rate=20, spo2=97.5, heart_rate=90, sbp=110, dbp=72, temperature=36.6),
    AgeBand.ADULT_18PLUS: dict(resp_rate=15, spo2=97.5, heart_rate=75, sbp=117, dbp=72, temperature=37.2),
}

_RACES = ["white", "undefined", "black_african_american", "hispanic_latino",
          "asian", "american_indian_alaska_native",
          "native_hawaiian_pacific_islander", "multiracial"]
_RACE_P = [0.55, 0.11, 0.12, 0.08, 0.08, 0.02, 0.02, 0.02]


@dataclass
class SynthConfig:
    patients: int = 12
    seed: int = 42
    pediatric_fraction: float = 0.25
    copd_fraction: float = 0.3          # among adults
    missing_rate: float = 0.075
    outlier_rate: float = 0.002
    duplicate_rate: float = 0.01
    min_minutes: int = 90
    max_minutes: int = 300
    mean_episodes: float = 1.5
    dirty: bool = False                 # add admissions the filters must drop


def _patient_demographics(rng: np.random.Generator, cfg: SynthConfig) -> dict:
    pediatric = rng.random() < cfg.pediatric_fraction
    if pediatric:
        age = float(rng.uniform(0.2, 17.5))
        copd = 0
    else:
        age = float(rng.uniform(18.0, 92.0))
        copd = int(rng.random() < cfg.copd_fraction)
    scale = min(age / 18.0, 1.0)
    height = float(rng.normal(60 + 112 * scale, 6.0))
    weight = float(rng.normal(6 + 70 * scale ** 1.3, 6.0 * max(scale, 0.2)))
    gender = "F" if rng.random() < 0.47 else "M"
    race = str(rng.choice(_RACES, p=_RACE_P))
    return {
        "age": round(age, 1), "gender": gender, "race": race, "copd": copd,
        "height": round(max(height, 45.0), 1), "weight": round(max(weight, 3.0), 1),
    }


def _episode_bump(length: int, start: int, duration: int) -> np.ndarray:
    """Raised-cosine bump in [0, 1] over [start, start+duration)."""
    t = np.arange(length)
    inside = (t >= start) & (t < start + duration)
    phase = (t - start) / max(duration, 1)
    bump = np.where(inside, 0.5 * (1 - np.cos(2 * np.pi * phase)), 0.0)
    return bump


def _admission_vitals(rng: np.random.Generator, minutes: np.ndarray,
                      band: AgeBand, cfg: SynthConfig) -> dict[str, np.ndarray]:
    base = _BASELINES[band]
    n = len(minutes)
    t = minutes.astype(float)
    out = {}
    circadian = np.sin(2 * np.pi * t / rng.uniform(80, 160) + rng.uniform(0, 6.28))

    noise_scale = dict(resp_rate=1.2, spo2=0.6, heart_rate=3.0, sbp=4.0,
                       dbp=3.0, temperature=0.12)
    swing = dict(resp_rate=1.5, spo2=0.8, heart_rate=5.0, sbp=6.0,
                 dbp=4.0, temperature=0.25)
    for col, mu in base.items():
        ar = np.zeros(n)
        eps = rng.normal(0, noise_scale[col], n)
        for i in range(1, n):
            ar[i] = 0.9 * ar[i - 1] + eps[i]
        out[col] = mu + swing[col] * circadian + ar

    # desaturation episodes: SpO2 dips with heart/respiratory compensation
    n_episodes = rng.poisson(cfg.mean_episodes)
    total = int(minutes[-1]) + 1
    for _ in range(n_episodes):
        duration = int(rng.integers(20, 70))
        start = int(rng.integers(0, max(total - duration, 1)))
        depth = float(rng.uniform(4.0, 35.0))
        bump = _episode_bump(total, start, duration)[minutes]
        out["spo2"] = out["spo2"] - depth * bump
        out["heart_rate"] = out["heart_rate"] + 0.8 * depth * bump
        out["resp_rate"] = out["resp_rate"] + 0.4 * depth * bump

    out["spo2"] = np.clip(out["spo2"], 52.0, 100.0)
    out["heart_rate"] = np.clip(out["heart_rate"], 20.0, 260.0)
    out["resp_rate"] = np.clip(out["resp_rate"], 2.0, 120.0)
    out["sbp"] = np.clip(out["sbp"], 40.0, 260.0)
    out["dbp"] = np.clip(out["dbp"], 20.0, np.minimum(out["sbp"] - 5.0, 200.0))
    out["temperature"] = np.clip(out["temperature"], 33.0, 41.5)
    return out


def generate_cohort(cfg: SynthConfig | None = None) -> pd.DataFrame:
    """Raw input-schema rows for a synthetic cohort (one row per charttime)."""
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    rows = []
    base_time = pd.Timestamp("2019-03-01 00:00:00")
    hadm_counter = 0

    for p in range(cfg.patients):
        subject_id = f"P{p + 1:04d}"
        demo = _patient_demographics(rng, cfg)
        band = age_band(demo["age"])
        n_adm = 1 + int(rng.random() < 0.25)
        for _ in range(n_adm):
            hadm_counter += 1
            hadm_id = f"A{hadm_counter:05d}"
            start = base_time + pd.Timedelta(days=p * 3 + hadm_counter)
            total_minutes = int(rng.integers(cfg.min_minutes, cfg.max_minutes + 1))
            gaps = rng.integers(1, 8, size=max(total_minutes // 4, 35))
            minutes = np.unique(np.concatenate([[0], np.cumsum(gaps)]))
            minutes = minutes[minutes <= total_minutes]
            vitals = _admission_vitals(rng, minutes, band, cfg)

            for i, m in enumerate(minutes):
                row = {
                    "subject_id": subject_id,
                    "hadm_id": hadm_id,
                    "charttime": (start + pd.Timedelta(minutes=int(m))),
                    **{col: vitals[col][i] for col in vitals},
                    **demo,
                }
                # MCAR missingness on the vitals
                for col in ("heart_rate", "resp_rate", "spo2", "sbp", "dbp",
                            "temperature"):
                    if rng.random() < cfg.missing_rate:
                        row[col] = np.nan
                    elif rng.random() < cfg.outlier_rate:
                        row[col] = {"spo2": 105.0, "temperature": 61.0}.get(col, 340.0)
                rows.append(row)
                if rng.random() < cfg.duplicate_rate:
                    dup = dict(row)
                    dup["heart_rate"] = vitals["heart_rate"][i] + 1.0
                    rows.append(dup)

    if cfg.dirty:
        rows.extend(_dirty_admissions(rng, base_time, hadm_counter, cfg))

    df = pd.DataFrame(rows)
    df["charttime"] = df["charttime"].dt.strftime("%Y-%m-%dT%H:%M:%S")
    return df[INPUT_COLUMNS]


def _dirty_admissions(rng: np.random.Generator, base_time: pd.Timestamp,
                      hadm_counter: int, cfg: SynthConfig) -> list[dict]:
    """Admissions the inclusion filters must drop: too short, and gappy."""
    demo = {"age": 40.0, "gender": "M", "race": "white", "copd": 0,
            "height": 175.0, "weight": 80.0}
    rows = []
    # 10-row admission (below the 30-row minimum)
    for i in range(10):
        rows.append({"subject_id": "P9001", "hadm_id": f"A{hadm_counter + 1:05d}",
                     "charttime": base_time + pd.Timedelta(minutes=i),
                     "heart_rate": 80.0, "resp_rate": 15.0, "spo2": 97.0,
                     "sbp": 115.0, "dbp": 70.0, "temperature": 37.0, **demo})
    # dense admission with one 61-minute hole
    minutes = list(range(40)) + [t + 101 for t in range(40)]
    for m in minutes:
        rows.append({"subject_id": "P9002", "hadm_id": f"A{hadm_counter + 2:05d}",
                     "charttime": base_time + pd.Timedelta(minutes=m),
                     "heart_rate": 82.0, "resp_rate": 16.0, "spo2": 96.0,
                     "sbp": 118.0, "dbp": 72.0, "temperature": 36.9, **demo})
    return rows


def spline_adversarial_admission() -> pd.DataFrame:
    """Plateau-then-cliff knots that make cubic interpolation overshoot.

    Linear interpolation stays inside every bracketing-knot hull on this
    series; a cubic spline does not (it swings above the plateau and below
    the cliff).
    """
    minutes = [0, 1, 2, 3, 4, 16, 17, 18, 30, 31]
    spo2 = [97.0, 97.0, 97.0, 97.0, 97.0, 58.0, 97.0, 97.0, 97.0, 97.0]
    hr = [70.0, 70.0, 70.0, 70.0, 70.0, 150.0, 70.0, 70.0, 70.0, 70.0]
    base = pd.Timestamp("2019-03-01 00:00:00")
    return pd.DataFrame({
        "subject_id": "PADV1",
        "hadm_id": "AADV01",
        "charttime": [base + pd.Timedelta(minutes=m) for m in minutes],
        "heart_rate": hr,
        "resp_rate": 15.0,
        "spo2": spo2,
        "sbp": 115.0,
        "dbp": 70.0,
        "temperature": 37.0,
        "age": 50.0,
        "gender": "F",
        "race": "white",
        "copd": 0,
        "height": 165.0,
        "weight": 70.0,
    })
