"""Gradient-boosted tree ensembles: weighted softmax multiclass classification
and squared-error regression over histogram-binned features."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError, TrainingError, WrongObjectiveError
from .binning import Binning
from .objectives import (
    multiclass_grad_hess,
    softmax,
    weighted_log_loss,
    weighted_mse,
)
from .tree import collect_gains, grow_tree, predict_codes, predict_raw

OBJECTIVE_MULTICLASS = "multiclass_softmax"
OBJECTIVE_REGRESSION = "regression_l2"

MODEL_SCHEMA_VERSION = 1


@dataclass
class GbdtConfig:
    objective: str = OBJECTIVE_MULTICLASS
    n_classes: int = 4
    rounds: int = 300
    early_stopping_rounds: int = 5
    learning_rate: float | None = None   # default 0.3 multiclass, 0.1 regression
    max_depth: int = 6
    min_child_weight: float = 1.0
    l2_lambda: float = 1.0
    max_bins: int = 255
    subsample: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.objective not in (OBJECTIVE_MULTICLASS, OBJECTIVE_REGRESSION):
            raise InvalidInputError(f"unknown objective {self.objective!r}")
        if self.rounds < 1:
            raise InvalidInputError("rounds must be >= 1")
        if not 2 <= self.max_bins <= 255:
            raise InvalidInputError("max_bins must be in [2, 255]")
        if not 0.0 < self.subsample <= 1.0:
            raise InvalidInputError("subsample must be in (0, 1]")
        if self.objective == OBJECTIVE_MULTICLASS and self.n_classes < 2:
            raise InvalidInputError("n_classes must be >= 2")

    @property
    def eta(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 0.3 if self.objective == OBJECTIVE_MULTICLASS else 0.1


@dataclass
class FeatureImportance:
    """Total realized split gain per feature, descending."""

    items: list[tuple[str, float]] = field(default_factory=list)

    def top(self, k: int) -> list[tuple[str, float]]:
        return self.items[:k]

    def as_dict(self) -> dict:
        return {name: gain for name, gain in self.items}


class GbdtModel:
    """A trained ensemble; immutable, safe for concurrent prediction."""

    def __init__(self, config: GbdtConfig, binning: Binning,
                 base_scores: np.ndarray, trees: list, best_round: int,
                 history: dict, feature_names: list[str] | None = None):
        self.config = config
        self.objective = config.objective
        self.n_classes = config.n_classes if self.is_classifier else 1
        self.binning = binning
        self.base_scores = np.asarray(base_scores, dtype=float)
        self.trees = trees           # trees[round][class] or trees[round]
        self.best_round = best_round
        self.history = history
        self.feature_names = feature_names

    @property
    def is_classifier(self) -> bool:
        return self.config.objective == OBJECTIVE_MULTICLASS

    # -- prediction ---------------------------------------------------------

    def _as_matrix(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != len(self.binning.uppers):
            raise InvalidInputError(
                f"expected {len(self.binning.uppers)} features, got shape {X.shape}")
        return X

    def raw_scores(self, x) -> np.ndarray:
        """Accumulated scores per class through best_round."""
        X = self._as_matrix(x)
        if self.is_classifier:
            scores = np.tile(self.base_scores, (X.shape[0], 1))
            for r in range(self.best_round):
                for c in range(self.n_classes):
                    scores[:, c] += predict_raw(self.trees[r][c], X)
            return scores
        pred = np.full(X.shape[0], self.base_scores[0])
        for r in range(self.best_round):
            pred += predict_raw(self.trees[r], X)
        return pred

    def predict_proba(self, x) -> np.ndarray:
        if not self.is_classifier:
            raise WrongObjectiveError("predict_proba requires a multiclass model")
        probs = softmax(self.raw_scores(x))
        return probs[0] if np.asarray(x).ndim == 1 else probs

    def predict_label(self, x) -> np.ndarray | int:
        """Argmax of predict_proba; ties break toward the higher class."""
        probs = np.atleast_2d(self.predict_proba(x))
        k = probs.shape[1]
        labels = k - 1 - np.argmax(probs[:, ::-1], axis=1)
        return int(labels[0]) if np.asarray(x).ndim == 1 else labels

    def predict(self, x) -> np.ndarray:
        if self.is_classifier:
            raise WrongObjectiveError("predict (regression) requires a regression model")
        return self.raw_scores(x)

    # -- introspection ------------------------------------------------------

    def feature_importance(self) -> FeatureImportance:
        """Per-feature total split gain across trees up to best_round."""
        n_features = len(self.binning.uppers)
        gains = np.zeros(n_features)
        for r in range(self.best_round):
            round_trees = self.trees[r] if self.is_classifier else [self.trees[r]]
            for node in round_trees:
                collect_gains(node, gains)
        names = self.feature_names or [f"f{i}" for i in range(n_features)]
        order = sorted(range(n_features), key=lambda i: (-gains[i], i))
        return FeatureImportance([(names[i], float(gains[i])) for i in order])

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "config": asdict(self.config),
            "base_scores": self.base_scores.tolist(),
            "binning": self.binning.as_lists(),
            "trees": self.trees,
            "best_round": self.best_round,
            "history": self.history,
            "feature_names": self.feature_names,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: dict) -> "GbdtModel":
        if data.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise InvalidInputError(
                f"unsupported model schema version {data.get('schema_version')!r}")
        config = GbdtConfig(**data["config"])
        return cls(config, Binning.from_lists(data["binning"]),
                   np.asarray(data["base_scores"]), data["trees"],
                   data["best_round"], data["history"], data.get("feature_names"))

    @classmethod
    def load(cls, path: str | Path) -> "GbdtModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- training ----------------------------------------------------------------

def _validate_matrix(X: np.ndarray, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise TrainingError(f"{what}: need a non-empty 2-D matrix, got shape {X.shape}")
    if np.isinf(X).any():
        raise TrainingError(f"{what}: infinite values are not allowed (NaN marks missing)")
    return X


def _validate_weights(w, n: int) -> np.ndarray:
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,) or not np.isfinite(w).all() or (w <= 0).any():
        raise TrainingError("sample weights must be positive, finite, one per row")
    return w


def _subsample_rows(rng: np.random.Generator, n: int, fraction: float) -> np.ndarray:
    if fraction >= 1.0:
        return np.arange(n)
    m = max(1, int(round(fraction * n)))
    return np.sort(rng.choice(n, size=m, replace=False))


def fit_classifier(X, y, sample_weights=None, config: GbdtConfig | None = None,
                   validation: tuple | None = None,
                   feature_names: list[str] | None = None) -> GbdtModel:
    """Fit the weighted softmax multiclass ensemble.

    ``validation`` is an optional (X, y, weights) triple; when given, training
    stops once weighted validation log-loss has not improved for
    ``early_stopping_rounds`` consecutive rounds, and prediction uses the
    trees up to the best round.
    """
    config = config or GbdtConfig()
    if config.objective != OBJECTIVE_MULTICLASS:
        raise WrongObjectiveError("fit_classifier requires the multiclass objective")
    X = _validate_matrix(X, "X")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise TrainingError("y must be one label per row")
    if not np.issubdtype(y.dtype, np.integer):
        yf = np.asarray(y, dtype=float)
        if not np.isfinite(yf).all() or np.any(yf != np.round(yf)):
            raise TrainingError("labels must be finite integers")
        y = yf.astype(int)
    if np.any((y < 0) | (y >= config.n_classes)):
        raise TrainingError(f"labels must lie in [0, {config.n_classes})")
    if np.unique(y).size < 2:
        raise TrainingError("training data contains a single class")
    w = _validate_weights(sample_weights, X.shape[0])

    K = config.n_classes
    n = X.shape[0]
    binning = Binning.fit(X, config.max_bins)
    codes = binning.transform(X)
    base = np.zeros(K)
    F = np.tile(base, (n, 1))

    has_valid = validation is not None
    if has_valid:
        Xv = _validate_matrix(validation[0], "validation X")
        yv = np.asarray(validation[1], dtype=int)
        wv = _validate_weights(validation[2] if len(validation) > 2 else None,
                               Xv.shape[0])
        codes_v = binning.transform(Xv)
        Fv = np.tile(base, (Xv.shape[0], 1))

    rng = np.random.default_rng(config.seed)
    trees: list[list[dict]] = []
    history: dict = {"train_loss": [], "valid_loss": [] if has_valid else None}
    best_loss = np.inf
    best_round = 0
    wait = 0

    for r in range(config.rounds):
        probs = softmax(F)
        rows = _subsample_rows(rng, n, config.subsample)
        round_trees = []
        for c in range(K):
            g, h = multiclass_grad_hess(probs, y, w, c)
            node = grow_tree(codes, g, h, rows, binning, config.max_depth,
                             config.l2_lambda, config.min_child_weight, config.eta)
            F[:, c] += predict_codes(node, codes, binning)
            round_trees.append(node)
        trees.append(round_trees)
        history["train_loss"].append(weighted_log_loss(y, softmax(F), w))

        if has_valid:
            for c in range(K):
                Fv[:, c] += predict_codes(round_trees[c], codes_v, binning)
            val_loss = weighted_log_loss(yv, softmax(Fv), wv)
            history["valid_loss"].append(val_loss)
            if val_loss < best_loss:
                best_loss = val_loss
                best_round = r + 1
                wait = 0
            else:
                wait += 1
                if wait >= config.early_stopping_rounds:
                    break
        else:
            best_round = r + 1

    return GbdtModel(config, binning, base, trees, best_round, history,
                     feature_names)


def fit_regressor(X, y, config: GbdtConfig | None = None, sample_weights=None,
                  validation: tuple | None = None,
                  feature_names: list[str] | None = None) -> GbdtModel:
    """Fit the squared-error ensemble (g = pred - y, h = 1, base = mean y)."""
    config = config or GbdtConfig(objective=OBJECTIVE_REGRESSION)
    if config.objective != OBJECTIVE_REGRESSION:
        raise WrongObjectiveError("fit_regressor requires the regression objective")
    X = _validate_matrix(X, "X")
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],) or not np.isfinite(y).all():
        raise TrainingError("y must be finite, one value per row")
    w = _validate_weights(sample_weights, X.shape[0])

    n = X.shape[0]
    binning = Binning.fit(X, config.max_bins)
    codes = binning.transform(X)
    base = float(np.average(y, weights=w))
    pred = np.full(n, base)

    has_valid = validation is not None
    if has_valid:
        Xv = _validate_matrix(validation[0], "validation X")
        yv = np.asarray(validation[1], dtype=float)
        wv = _validate_weights(validation[2] if len(validation) > 2 else None,
                               Xv.shape[0])
        codes_v = binning.transform(Xv)
        pred_v = np.full(Xv.shape[0], base)

    rng = np.random.default_rng(config.seed)
    trees: list[dict] = []
    history: dict = {"train_loss": [], "valid_loss": [] if has_valid else None}
    best_loss = np.inf
    best_round = 0
    wait = 0

    for r in range(config.rounds):
        g = w * (pred - y)
        h = w.copy()
        rows = _subsample_rows(rng, n, config.subsample)
        node = grow_tree(codes, g, h, rows, binning, config.max_depth,
                         config.l2_lambda, config.min_child_weight, config.eta)
        pred += predict_codes(node, codes, binning)
        trees.append(node)
        history["train_loss"].append(weighted_mse(y, pred, w))

        if has_valid:
            pred_v += predict_codes(node, codes_v, binning)
            val_loss = weighted_mse(yv, pred_v, wv)
            history["valid_loss"].append(val_loss)
            if val_loss < best_loss:
                best_loss = val_loss
                best_round = r + 1
                wait = 0
            else:
                wait += 1
                if wait >= config.early_stopping_rounds:
                    break
        else:
            best_round = r + 1

    return GbdtModel(config, binning, np.asarray([base]), trees, best_round,
                     history, feature_names)


# Thin functional wrappers matching the operation names.

def predict_proba(model: GbdtModel, x) -> np.ndarray:
    return model.predict_proba(x)


def predict_label(model: GbdtModel, x):
    return model.predict_label(x)


def feature_importance(model: GbdtModel) -> FeatureImportance:
    return model.feature_importance()
