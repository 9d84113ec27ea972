"""Run configuration: strict JSON schema, defaults, and config hashing.

Unknown keys anywhere in the config are rejected so typos cannot silently
fall back to defaults.  The resolved config (with the seed) is hashed and
embedded in every output artifact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .gbdt import OBJECTIVE_REGRESSION, GbdtConfig
from .impute import ImputeConfig
from .synth import SynthConfig

_STAGE_NAMES = ["preprocess", "impute", "dataset", "train", "evaluate", "analyze"]


def _build(cls, section: dict, path: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys under {path}: {sorted(unknown)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad values under {path}: {exc}") from exc


@dataclass
class DatasetParams:
    lag_minutes: int = 5
    window_width: int = 5
    sequence_length: int = 1024
    pad_value: float = 1000.0
    fractions: tuple[float, float, float] = (0.75, 0.125, 0.125)

    def __post_init__(self):
        self.fractions = tuple(self.fractions)
        if len(self.fractions) != 3:
            raise ValueError("fractions must have 3 entries")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")


@dataclass
class RunConfig:
    seed: int = 42
    jobs: int = 1
    input: str | None = None
    out_dir: str = "artifacts"
    matrix_file: str | None = None
    stages: dict = field(default_factory=lambda: {s: True for s in _STAGE_NAMES})
    synth: SynthConfig = field(default_factory=SynthConfig)
    impute: ImputeConfig = field(default_factory=ImputeConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    dataset: DatasetParams = field(default_factory=DatasetParams)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        seed = data.pop("seed", 42)

        stages = {s: True for s in _STAGE_NAMES}
        user_stages = data.pop("stages", {})
        bad = set(user_stages) - set(_STAGE_NAMES)
        if bad:
            raise ConfigError(f"unknown stage toggles: {sorted(bad)}")
        stages.update({k: bool(v) for k, v in user_stages.items()})

        synth_section = dict(data.pop("synth", {}))
        synth_section.setdefault("seed", seed)
        synth = _build(SynthConfig, synth_section, "synth")

        impute_section = dict(data.pop("impute", {}))
        regressor_section = dict(impute_section.pop("regressor", {}))
        regressor_section.setdefault("objective", OBJECTIVE_REGRESSION)
        regressor_section.setdefault("rounds", 50)
        regressor_section.setdefault("max_depth", 4)
        regressor_section.setdefault("learning_rate", 0.2)
        regressor_section.setdefault("seed", seed)
        impute_section["regressor"] = _build(GbdtConfig, regressor_section,
                                             "impute.regressor")
        impute = _build(ImputeConfig, impute_section, "impute")

        gbdt_section = dict(data.pop("gbdt", {}))
        gbdt_section.setdefault("seed", seed)
        gbdt = _build(GbdtConfig, gbdt_section, "gbdt")

        dataset = _build(DatasetParams, dict(data.pop("dataset", {})), "dataset")

        return cls(seed=seed, stages=stages, synth=synth, impute=impute,
                   gbdt=gbdt, dataset=dataset, **data)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["dataset"]["fractions"] = list(self.dataset.fractions)
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.as_dict(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def meta(self) -> dict:
        return {"seed": self.seed, "config_hash": self.config_hash()}
