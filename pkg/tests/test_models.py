from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssc_radiomics.metrics import auroc
from ssc_radiomics.models import (ClassWeights, GbtConfig, GbtModel, LogRegConfig, LogRegModel,
                                  Standardizer, compute_class_weights, load_model, log_loss,
                                  loss_and_grad, save_model, staged_training_loss, train_gbt,
                                  train_logreg, weighted_cross_entropy)


def labels(n, n_pos):
    return np.r_[np.ones(n_pos), np.zeros(n - n_pos)]


# --- class weights ------------------------------------------------------------

@pytest.mark.parametrize("n_pos,w_pos,w_neg", [(181, 5.8702, 0.5466), (326, 3.2592, 0.5906),
                                               (428, 2.4825, 0.6261)])
def test_reported_class_weights(n_pos, w_pos, w_neg):
    w = compute_class_weights(labels(2125, n_pos))
    assert w.w_pos == Fraction(2125, 2 * n_pos) and w.w_neg == Fraction(2125, 2 * (2125 - n_pos))
    assert round(float(w.w_pos), 4) == w_pos and round(float(w.w_neg), 4) == w_neg


@settings(max_examples=100)
@given(st.integers(1, 500), st.integers(1, 500))
def test_class_weight_identity(n_pos, n_neg):
    w = compute_class_weights(labels(n_pos + n_neg, n_pos))
    n = n_pos + n_neg
    assert w.w_pos * 2 * n_pos == n and w.w_neg * 2 * n_neg == n
    # weighted class masses are equal
    assert w.w_pos * n_pos == w.w_neg * n_neg


def test_balanced_weights_are_one():
    w = compute_class_weights(labels(10, 5))
    assert w.w_pos == w.w_neg == 1


def test_single_class_rejected():
    with pytest.raises(ValueError):
        compute_class_weights(np.ones(5))


# --- logistic regression ----------------------------------------------------------------

def _random_problem(rng, n=40, d=5):
    X = rng.normal(size=(n, d))
    y = (rng.uniform(size=n) < 0.4).astype(float)
    y[:2] = [0, 1]
    return X, y


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X, y = _random_problem(rng)
    sw = compute_class_weights(y).sample_weights(y)
    params = rng.normal(size=X.shape[1] + 1)
    _, g = loss_and_grad(params, X, y, sw, 0.01)
    h = 1e-6
    num = np.array([(loss_and_grad(params + h * e, X, y, sw, 0.01)[0]
                     - loss_and_grad(params - h * e, X, y, sw, 0.01)[0]) / (2 * h)
                    for e in np.eye(params.size)])
    assert np.linalg.norm(num - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_uniform_weights_reduce_to_cross_entropy():
    rng = np.random.default_rng(1)
    X, y = _random_problem(rng)
    params = rng.normal(size=X.shape[1] + 1)
    loss, _ = loss_and_grad(params, X, y, np.ones_like(y), 0.0)
    p = 1 / (1 + np.exp(-(X @ params[:-1] + params[-1])))
    ce = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert abs(loss - ce) <= 1e-12


def test_separable_data_is_ranked_perfectly():
    x = np.linspace(-1, 1, 30)[:, None]
    y = (x[:, 0] > 0.1).astype(float)
    m = train_logreg(x, y, compute_class_weights(y), LogRegConfig(learning_rate=0.5, n_iter=3000))
    assert auroc(m.predict_proba(x), y) == 1.0
    assert np.all(np.diff(m.predict_proba(x)) >= 0)


def test_zero_model_predicts_half():
    m = LogRegModel(np.zeros(3), 0.0, Standardizer.identity(3))
    np.testing.assert_array_equal(m.predict_proba(np.ones((4, 3))), 0.5)


def test_logreg_loss_decreases_and_roundtrips(tmp_path):
    rng = np.random.default_rng(2)
    X, y = _random_problem(rng, 60, 4)
    X[:, 0] += 2 * y
    w = compute_class_weights(y)
    short = train_logreg(X, y, w, LogRegConfig(n_iter=5))
    long = train_logreg(X, y, w, LogRegConfig(n_iter=500))
    sw = w.sample_weights(y)
    assert (weighted_cross_entropy(long.decision_function(X), y, sw)
            < weighted_cross_entropy(short.decision_function(X), y, sw))
    back = load_model(save_model(long, tmp_path / "m.json"))
    assert back.predict_proba(X).tobytes() == long.predict_proba(X).tobytes()


def test_logreg_rejects_bad_input():
    with pytest.raises(ValueError):
        train_logreg(np.ones((3, 2)), np.array([0, 1, 2]))
    with pytest.raises(ValueError):
        train_logreg(np.full((2, 2), np.nan), np.array([0, 1]))


# --- gradient boosting ------------------------------------------------------------------

def test_stump_finds_step():
    x = np.arange(20, dtype=float)[:, None]
    y = (x[:, 0] >= 12).astype(float)
    m = train_gbt(x, y, config=GbtConfig(n_trees=1, max_depth=1, learning_rate=1.0, min_leaf=1))
    assert m.trees[0].feature[0] == 0 and 11 <= m.trees[0].threshold[0] < 12
    assert np.all((m.predict_proba(x) > 0.5) == (y == 1))


@pytest.mark.parametrize("seed", range(5))
def test_staged_loss_non_increasing(seed):
    rng = np.random.default_rng(seed)
    X, y = _random_problem(rng, 80, 6)
    w = compute_class_weights(y)
    m = train_gbt(X, y, w, GbtConfig(n_trees=60, max_depth=3, learning_rate=0.1))
    trace = staged_training_loss(m, X, y, w)
    assert np.all(np.diff(trace) <= 1e-12)
    assert trace[-1] < trace[0]


def test_zero_trees_predict_base_score():
    m = GbtModel((), 0.1, 0.4, 2)
    np.testing.assert_allclose(m.predict_proba(np.zeros((3, 2))), 1 / (1 + np.exp(-0.4)))


def test_gbt_seed_only_matters_with_bagging(tmp_path):
    rng = np.random.default_rng(3)
    X, y = _random_problem(rng, 50, 4)
    a = train_gbt(X, y, config=GbtConfig(n_trees=10, seed=1))
    b = train_gbt(X, y, config=GbtConfig(n_trees=10, seed=2))
    assert a.predict_proba(X).tobytes() == b.predict_proba(X).tobytes()
    c = train_gbt(X, y, config=GbtConfig(n_trees=10, seed=1, bag_fraction=0.6))
    d = train_gbt(X, y, config=GbtConfig(n_trees=10, seed=1, bag_fraction=0.6))
    e = train_gbt(X, y, config=GbtConfig(n_trees=10, seed=2, bag_fraction=0.6))
    assert c.predict_proba(X).tobytes() == d.predict_proba(X).tobytes()
    assert c.predict_proba(X).tobytes() != e.predict_proba(X).tobytes()
    back = load_model(save_model(c, tmp_path / "g.json"))
    assert back.predict_proba(X).tobytes() == c.predict_proba(X).tobytes()


def test_gbt_config_validation():
    X, y = _random_problem(np.random.default_rng(0), 10, 2)
    for bad in (GbtConfig(n_trees=0), GbtConfig(max_depth=0), GbtConfig(bag_fraction=0),
                GbtConfig(learning_rate=0)):
        with pytest.raises(ValueError):
            train_gbt(X, y, config=bad)


def test_probabilities_are_clipped_and_log_loss_finite():
    p = ClassWeights.uniform()
    assert p.w_pos == p.w_neg == 1
    assert np.isfinite(log_loss(np.array([0.0, 1.0]), np.array([1.0, 0.0])))
