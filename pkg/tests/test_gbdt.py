"""Boosted-tree learner: objectives, splitting, training, serialization."""

import json

import numpy as np
import pytest

from hypoxemia.errors import InvalidInputError, TrainingError, WrongObjectiveError
from hypoxemia.gbdt import (
    Binning,
    GbdtConfig,
    GbdtModel,
    fit_classifier,
    fit_regressor,
    softmax_cross_entropy,
    softmax_gradient,
    weighted_log_loss,
)


def quartile_classes(rng, n):
    x = rng.uniform(0, 1, (n, 1))
    y = np.minimum((x[:, 0] * 4).astype(int), 3)
    return x, y


# -- config / binning -----------------------------------------------------------

def test_config_validation():
    with pytest.raises(InvalidInputError):
        GbdtConfig(rounds=0)
    with pytest.raises(InvalidInputError):
        GbdtConfig(max_bins=1)
    with pytest.raises(InvalidInputError):
        GbdtConfig(subsample=0.0)
    with pytest.raises(InvalidInputError):
        GbdtConfig(objective="poisson")
    assert GbdtConfig().eta == 0.3
    assert GbdtConfig(objective="regression_l2").eta == 0.1


def test_binning_codes_and_missing_bin():
    X = np.array([[1.0], [2.0], [3.0], [np.nan]])
    binning = Binning.fit(X, max_bins=255)
    codes = binning.transform(X)
    assert codes[:3, 0].tolist() == [0, 1, 2]
    assert codes[3, 0] == binning.missing_code(0)


def test_binning_quantile_reduction():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10000, 1))
    binning = Binning.fit(X, max_bins=16)
    assert len(binning.uppers[0]) <= 15
    codes = binning.transform(X)
    assert codes.max() <= 15


# -- losses -----------------------------------------------------------------------

def test_weighted_log_loss_examples():
    # perfect one-hot predictions
    P = np.eye(4)[[0, 1, 2, 3]]
    assert weighted_log_loss([0, 1, 2, 3], P) <= 1e-14
    # uniform predictions
    P = np.full((3, 4), 0.25)
    assert weighted_log_loss([0, 1, 3], P) == pytest.approx(np.log(4), abs=1e-12)
    # hand computation
    P = np.array([[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.25, 0.75]])
    expected = (np.log(2) + np.log(4 / 3)) / 2
    assert weighted_log_loss([0, 3], P) == pytest.approx(expected, abs=1e-12)


def test_weighted_log_loss_shape_mismatch():
    with pytest.raises(InvalidInputError):
        weighted_log_loss([0, 1], np.full((3, 4), 0.25))
    with pytest.raises(InvalidInputError):
        weighted_log_loss([0, 1], np.full((2, 4), 0.25), weights=[1.0])


def test_softmax_gradient_matches_finite_differences(rng):
    eps = 1e-5
    for _ in range(100):
        logits = rng.normal(0, 2, size=4)
        label = int(rng.integers(0, 4))
        grad = softmax_gradient(logits, label)
        for k in range(4):
            up, down = logits.copy(), logits.copy()
            up[k] += eps
            down[k] -= eps
            numeric = (softmax_cross_entropy(up, label)
                       - softmax_cross_entropy(down, label)) / (2 * eps)
            assert abs(grad[k] - numeric) <= 1e-4 * max(1.0, abs(numeric))


# -- classification ---------------------------------------------------------------

def test_classifier_solves_separable_quartiles(rng):
    X, y = quartile_classes(rng, 1000)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=50, seed=42))
    accuracy = float((model.predict_label(X) == y).mean())
    assert accuracy >= 0.99   # a depth-2 decision tree achieves 1.0 here


def test_early_stopping_halts_within_patience(rng):
    X, y = quartile_classes(rng, 800)
    Xv, yv = quartile_classes(rng, 300)
    yv = 3 - yv   # validation labels inverted: loss degrades from the start
    model = fit_classifier(X, y, config=GbdtConfig(rounds=300, seed=0),
                           validation=(Xv, yv, None))
    assert len(model.trees) < 300
    assert len(model.trees) <= model.best_round + 5


def test_weight_doubling_leaves_model_invariant(rng):
    # gain argmax and leaf values -G/(H+lambda) are scale-free when lambda=0
    X, y = quartile_classes(rng, 600)
    cfg = GbdtConfig(rounds=6, l2_lambda=0.0, min_child_weight=0.0, seed=1)

    def strip_gains(node):
        if "value" in node:
            return node
        return {k: (strip_gains(v) if k in ("left", "right") else v)
                for k, v in node.items() if k != "gain"}

    single = fit_classifier(X, y, sample_weights=np.ones(len(y)), config=cfg)
    doubled = fit_classifier(X, y, sample_weights=np.full(len(y), 2.0), config=cfg)
    a = [[strip_gains(t) for t in r] for r in single.trees]
    b = [[strip_gains(t) for t in r] for r in doubled.trees]
    assert json.dumps(a) == json.dumps(b)
    assert np.array_equal(single.predict_proba(X), doubled.predict_proba(X))


def test_train_loss_non_increasing(rng):
    X, y = quartile_classes(rng, 900)
    model = fit_classifier(X, y, config=GbdtConfig(
        rounds=40, l2_lambda=0.0, learning_rate=0.1, subsample=1.0, seed=3))
    losses = np.asarray(model.history["train_loss"])
    assert np.all(np.diff(losses) <= 1e-9)


def test_classifier_rejects_bad_inputs(rng):
    X, y = quartile_classes(rng, 50)
    with pytest.raises(TrainingError):
        fit_classifier(np.empty((0, 1)), np.empty(0, dtype=int))
    with pytest.raises(TrainingError):
        fit_classifier(X, np.zeros(len(y), dtype=int))   # single class
    bad = X.copy()
    bad[0, 0] = np.inf
    with pytest.raises(TrainingError):
        fit_classifier(bad, y)
    with pytest.raises(TrainingError):
        fit_classifier(X, y, sample_weights=np.zeros(len(y)))
    with pytest.raises(TrainingError):
        fit_classifier(X, y.astype(float) + 0.5)


def test_classifier_handles_missing_values(rng):
    X, y = quartile_classes(rng, 1000)
    X = X.copy()
    X[rng.random(len(X)) < 0.1, 0] = np.nan
    model = fit_classifier(X, y, config=GbdtConfig(rounds=30, seed=2))
    observed = ~np.isnan(X[:, 0])
    accuracy = (model.predict_label(X[observed]) == y[observed]).mean()
    assert accuracy >= 0.95


# -- prediction --------------------------------------------------------------------

def test_predict_proba_normalized(rng):
    X, y = quartile_classes(rng, 500)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=10, seed=4))
    probs = model.predict_proba(rng.uniform(0, 1, (200, 1)))
    assert np.all(probs >= 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_zero_round_model_uniform_and_label_ties_severe(rng):
    X, y = quartile_classes(rng, 200)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=1, seed=0))
    model = GbdtModel(model.config, model.binning, model.base_scores,
                      model.trees, 0, model.history)   # force 0 usable rounds
    probs = model.predict_proba(X[:4])
    assert np.allclose(probs, 0.25)
    # all-equal probabilities resolve to the most severe class
    assert np.all(model.predict_label(X[:4]) == 3)


def test_predict_label_examples(rng):
    X, y = quartile_classes(rng, 400)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=40, seed=5))
    assert np.all(model.predict_label(X) == np.argmax(model.predict_proba(X), axis=1))
    single = model.predict_label(X[0])
    assert isinstance(single, int)


def test_predict_proba_requires_classifier():
    model = fit_regressor(np.arange(6.0).reshape(-1, 1), np.arange(6.0),
                          config=GbdtConfig(objective="regression_l2", rounds=2))
    with pytest.raises(WrongObjectiveError):
        model.predict_proba(np.array([[1.0]]))
    with pytest.raises(WrongObjectiveError):
        fit_regressor(np.arange(6.0).reshape(-1, 1), np.arange(6.0),
                      config=GbdtConfig(rounds=2))


# -- regression --------------------------------------------------------------------

def test_regressor_constant_target():
    X = np.arange(10.0).reshape(-1, 1)
    model = fit_regressor(X, np.full(10, 7.0),
                          config=GbdtConfig(objective="regression_l2",
                                            rounds=1, l2_lambda=0.0))
    assert np.allclose(model.predict(X), 7.0)


def test_regressor_step_function():
    X = np.linspace(0, 1, 200).reshape(-1, 1)
    y = (X[:, 0] > 0.5).astype(float) * 3
    model = fit_regressor(X, y, config=GbdtConfig(
        objective="regression_l2", rounds=20, learning_rate=0.5))
    assert np.mean((model.predict(X) - y) ** 2) < 1e-3


def test_regressor_single_sample():
    model = fit_regressor(np.array([[1.0]]), np.array([5.5]),
                          config=GbdtConfig(objective="regression_l2",
                                            rounds=3, l2_lambda=0.0))
    assert model.predict(np.array([[1.0]]))[0] == 5.5


# -- importance ---------------------------------------------------------------------

def test_importance_finds_informative_feature(rng):
    n = 800
    signal = rng.uniform(0, 1, n)
    X = np.column_stack([signal, np.full(n, 3.0), rng.uniform(0, 1, n) * 0])
    y = np.minimum((signal * 4).astype(int), 3)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=20, seed=6),
                           feature_names=["signal", "constant", "zero"])
    importance = model.feature_importance()
    assert importance.items[0][0] == "signal"
    gains = importance.as_dict()
    assert gains["constant"] == 0.0
    assert gains["zero"] == 0.0
    assert gains["signal"] > 0


def test_importance_zero_round_model(rng):
    X, y = quartile_classes(rng, 100)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=1, seed=0))
    model = GbdtModel(model.config, model.binning, model.base_scores,
                      model.trees, 0, model.history)
    assert all(g == 0.0 for _, g in model.feature_importance().items)


def test_importance_permutes_with_features(rng):
    n = 600
    a = rng.uniform(0, 1, n)
    b = rng.uniform(0, 1, n)
    y = np.minimum(((a + 0.2 * b) * 3).astype(int), 3)
    cfg = GbdtConfig(rounds=10, seed=7)
    fwd = fit_classifier(np.column_stack([a, b]), y, config=cfg)
    rev = fit_classifier(np.column_stack([b, a]), y, config=cfg)
    gains_fwd = dict(fwd.feature_importance().items)
    gains_rev = dict(rev.feature_importance().items)
    assert gains_fwd["f0"] == pytest.approx(gains_rev["f1"], rel=1e-12)
    assert gains_fwd["f1"] == pytest.approx(gains_rev["f0"], rel=1e-12)


def test_importance_top_k(rng):
    X, y = quartile_classes(rng, 300)
    model = fit_classifier(np.column_stack([X, X * 0]), y,
                           config=GbdtConfig(rounds=5, seed=8))
    assert len(model.feature_importance().top(1)) == 1


# -- serialization -------------------------------------------------------------------

def test_serialization_round_trip_bit_identical(rng, tmp_path):
    X, y = quartile_classes(rng, 500)
    Xv, yv = quartile_classes(rng, 200)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=15, seed=9),
                           validation=(Xv, yv, None),
                           feature_names=["x"])
    path = tmp_path / "model.json"
    model.save(path)
    loaded = GbdtModel.load(path)
    queries = rng.uniform(-0.2, 1.2, (300, 1))
    assert np.array_equal(model.predict_proba(queries), loaded.predict_proba(queries))
    assert loaded.best_round == model.best_round
    assert loaded.feature_names == ["x"]
    # saving the loaded model reproduces the file byte for byte
    loaded.save(tmp_path / "model2.json")
    assert (tmp_path / "model.json").read_bytes() == (tmp_path / "model2.json").read_bytes()


def test_fixed_seed_reproduces_model(rng):
    X, y = quartile_classes(rng, 400)
    cfg = GbdtConfig(rounds=10, subsample=0.7, seed=11)
    m1 = fit_classifier(X, y, config=cfg)
    m2 = fit_classifier(X, y, config=cfg)
    assert m1.to_json() == m2.to_json()


def test_min_child_weight_blocks_splits(rng):
    # hessian mass cannot exceed n/4 per class at round one, so a large
    # floor forbids every split and all trees stay single leaves
    X, y = quartile_classes(rng, 80)
    model = fit_classifier(X, y, config=GbdtConfig(
        rounds=3, min_child_weight=1000.0, seed=0))
    for round_trees in model.trees:
        for tree in round_trees:
            assert set(tree) == {"value"}


def test_split_gains_non_negative_everywhere(rng):
    X, y = quartile_classes(rng, 700)
    model = fit_classifier(X, y, config=GbdtConfig(rounds=12, seed=13))

    def walk(node):
        if "value" in node:
            return
        assert node["gain"] >= 0
        walk(node["left"])
        walk(node["right"])

    for round_trees in model.trees:
        for tree in round_trees:
            walk(tree)
