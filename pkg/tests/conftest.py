import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def make_admission(minutes, subject_id="P0001", hadm_id="A00001", **columns):
    """Minimal admission frame with a charttime column at the given minutes."""
    base = pd.Timestamp("2019-03-01 00:00:00")
    n = len(minutes)
    data = {
        "subject_id": subject_id,
        "hadm_id": hadm_id,
        "charttime": [base + pd.Timedelta(minutes=int(m)) for m in minutes],
    }
    defaults = {
        "heart_rate": 80.0, "resp_rate": 15.0, "spo2": 97.0, "sbp": 115.0,
        "dbp": 70.0, "temperature": 37.0, "age": 50.0, "gender": "F",
        "height": 170.0, "weight": 70.0, "race": "white", "copd": 0,
    }
    defaults.update(columns)
    for key, value in defaults.items():
        data[key] = value if isinstance(value, (list, np.ndarray, pd.Series)) \
            else [value] * n
    return pd.DataFrame(data)
