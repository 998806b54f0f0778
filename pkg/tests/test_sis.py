import math

import numpy as np
import pytest

from infsens.sis import (
    ComponentConfig,
    LassoConfig,
    LinearModel,
    SubsetConfig,
    TrainingError,
    cross_validate,
    default_a_bar,
    lasso_objective,
    lasso_path_history,
    lasso_threshold,
    pls_weights,
    predict_linear,
    train_lasso,
    train_olsr,
    train_pcr,
    train_plsr,
    train_subset_selection,
)


def _regression(seed, n=40, n_p=4, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_p))
    a = rng.normal(size=n_p)
    return X, X @ a + 0.7 + noise * rng.normal(size=n)


# ---------------------------------------------------------------- OLSR


def test_olsr_exact_line():
    x = np.arange(5.0)
    m = train_olsr(x[:, None], 2 * x + 1)
    np.testing.assert_allclose(m.a, [2.0], atol=1e-12)
    assert m.a0 == pytest.approx(1.0)


def test_olsr_constant_output():
    X, _ = _regression(0)
    m = train_olsr(X, np.full(X.shape[0], 3.5))
    np.testing.assert_allclose(m.a, 0.0, atol=1e-12)
    assert m.a0 == pytest.approx(3.5)


@pytest.mark.parametrize("seed", range(5))
def test_olsr_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(10, 3))
    y = rng.normal(size=10)
    A = np.column_stack([X, np.ones(10)])
    coef = np.linalg.solve(A.T @ A, A.T @ y)
    m = train_olsr(X, y)
    np.testing.assert_allclose(np.append(m.a, m.a0), coef, atol=1e-9)
    r = y - predict_linear(m, X)
    assert np.max(np.abs(A.T @ r)) <= 1e-8 * 10


def test_olsr_rank_deficient_is_refused():
    X = np.ones((6, 2))
    X[:, 1] = np.arange(6.0)
    X = np.column_stack([X[:, 1], 2 * X[:, 1]])
    with pytest.raises(TrainingError, match="rank"):
        train_olsr(X, np.arange(6.0))


def test_olsr_needs_more_rows_than_inputs():
    with pytest.raises(TrainingError):
        train_olsr(np.eye(3), np.ones(3))


# ---------------------------------------------------------------- LASSO


def test_lasso_without_penalty_is_olsr():
    X, y = _regression(1)
    for refit in (True, False):
        m = train_lasso(X, y, LassoConfig(0.0, refit=refit))
        ref = train_olsr(X, y)
        np.testing.assert_allclose(m.a, ref.a, atol=1e-6)
        assert m.a0 == pytest.approx(ref.a0, abs=1e-6)


def test_lasso_above_threshold_is_zero():
    X, y = _regression(2)
    lam = lasso_threshold(X, y)
    expected = np.max(np.abs((X - X.mean(0)).T @ (y - y.mean())))
    assert lam == pytest.approx(expected)
    for factor in (1.0, 1.5):
        m = train_lasso(X, y, LassoConfig(factor * lam, refit=False))
        np.testing.assert_array_equal(m.a, 0.0)
        assert m.a0 == pytest.approx(y.mean())


def test_lasso_subgradient_optimality():
    X, y = _regression(3, noise=0.5)
    lam = 0.3 * lasso_threshold(X, y)
    m = train_lasso(X, y, LassoConfig(lam, refit=False))
    r = y - predict_linear(m, X)
    g = X.T @ r  # SSE/2 gradient with the offset at its optimum
    for j, aj in enumerate(m.a):
        if aj != 0.0:
            assert abs(g[j] - lam * np.sign(aj)) <= 1e-6
        else:
            assert abs(g[j]) <= lam + 1e-6


def test_lasso_sweeps_never_increase_objective():
    X, y = _regression(4, noise=1.0)
    hist = lasso_path_history(X, y, 0.2 * lasso_threshold(X, y))
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_lasso_objective_value():
    X = np.array([[1.0], [2.0]])
    y = np.array([1.0, 3.0])
    assert lasso_objective(X, y, np.array([1.0]), 0.0, 2.0) == pytest.approx(0.5 * (0 + 1) + 2.0)


def test_lasso_recovers_single_input():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 6))
        y = 3 * X[:, 0] + 0.5 * rng.normal(size=60)
        lam = 0.35 * lasso_threshold(X, y)
        m = train_lasso(X, y, LassoConfig(lam))
        hits += m.support.tolist() == [0]
    assert hits >= 95


def test_lasso_refit_uses_olsr_on_support():
    X, y = _regression(5, noise=2.0)
    lam = 0.5 * lasso_threshold(X, y)
    m = train_lasso(X, y, LassoConfig(lam))
    s = m.support
    ref = train_olsr(X[:, s], y)
    np.testing.assert_allclose(m.a[s], ref.a, atol=1e-12)


def test_lasso_negative_lambda():
    with pytest.raises(ValueError):
        LassoConfig(-1.0)


# ---------------------------------------------------------------- PCR / PLSR


@pytest.mark.parametrize("trainer", [train_pcr, train_plsr])
def test_full_components_equal_olsr(trainer):
    X, y = _regression(6, n_p=5)
    m = trainer(X, y, ComponentConfig(5))
    np.testing.assert_allclose(predict_linear(m, X), predict_linear(train_olsr(X, y), X), atol=1e-8)


@pytest.mark.parametrize("trainer", [train_pcr, train_plsr])
def test_components_above_rank_rejected(trainer):
    X, y = _regression(7, n_p=3)
    with pytest.raises(TrainingError):
        trainer(X, y, ComponentConfig(4))


def test_pcr_single_component_follows_dominant_direction():
    rng = np.random.default_rng(8)
    d = np.array([3.0, 4.0, 0.0]) / 5.0
    X = np.outer(rng.normal(size=200) * 10, d) + 0.01 * rng.normal(size=(200, 3))
    y = X @ d + 0.1 * rng.normal(size=200)
    a = train_pcr(X, y, ComponentConfig(1)).a
    assert abs(a @ d) / np.linalg.norm(a) >= 0.999


def test_pls_first_weight_picks_relevant_input():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(100, 5))
    y = 2 * X[:, 3] + 0.1 * rng.normal(size=100)
    W, _, _ = pls_weights(X, y, 1)
    assert int(np.argmax(np.abs(W[:, 0]))) == 3


def test_plsr_on_noise_barely_fits():
    ok = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(100, 5))
        y = rng.normal(size=100)
        m = train_plsr(X, y, ComponentConfig(1))
        ok += np.sqrt(np.mean((y - predict_linear(m, X)) ** 2)) >= 0.95 * np.std(y)
    assert ok >= 90


# ---------------------------------------------------------------- subset selection


def test_subset_full_support_is_olsr():
    X, y = _regression(10, n_p=3)
    m = train_subset_selection(X, y, SubsetConfig(3))
    np.testing.assert_allclose(m.a, train_olsr(X, y).a, atol=1e-12)


def test_subset_recovers_planted_pair():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(50, 6))
        y = 2 * X[:, 1] - 1.5 * X[:, 4] + 0.3 * rng.normal(size=50)
        hits += train_subset_selection(X, y, SubsetConfig(2)).params["support"] == [1, 4]
    assert hits >= 95


def test_subset_counts_candidates():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 35))
    y = X[:, 0] + X[:, 7] + 0.1 * rng.normal(size=80)
    m = train_subset_selection(X, y, SubsetConfig(2))
    assert m.params["candidates"] == math.comb(35, 2) == 595


def test_subset_beats_any_manual_support():
    X, y = _regression(11, n_p=5, noise=1.0)
    m = train_subset_selection(X, y, SubsetConfig(2))
    sse = np.sum((y - predict_linear(m, X)) ** 2)
    for cols in ([0, 1], [2, 3], [1, 4], [0, 4]):
        ref = train_olsr(X[:, cols], y)
        assert sse <= np.sum((y - predict_linear(ref, X[:, cols])) ** 2) + 1e-9


def test_subset_miqp_mode_finds_planted_support():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(30, 5))
    y = 2 * X[:, 0] + 3 * X[:, 2] + 0.05 * rng.normal(size=30)
    m = train_subset_selection(X, y, SubsetConfig(2, mode="miqp"))
    assert sorted(m.params["support"]) == [0, 2]


def test_subset_enumeration_limit():
    X, y = _regression(13, n=60, n_p=30)
    with pytest.raises(TrainingError):
        train_subset_selection(X, y, SubsetConfig(15, max_candidates=1000))


def test_default_a_bar():
    X = np.arange(6.0)[:, None]
    assert default_a_bar(X, 0.5 * X[:, 0]) == pytest.approx(5.0)
    assert default_a_bar(X, 0.01 * X[:, 0]) == pytest.approx(1.0)


# ---------------------------------------------------------------- CV and prediction


def _pcr(X, y, k):
    return train_pcr(X, y, ComponentConfig(k))


def test_cv_single_value_grid():
    X, y = _regression(14)
    assert cross_validate(_pcr, X, y, [2], folds=3).best == 2


def test_cv_selects_true_rank():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        F = rng.normal(size=(60, 2))
        X = F @ rng.normal(size=(2, 5))
        y = F @ np.array([1.0, -1.0]) + 0.1 * rng.normal(size=60)
        res = cross_validate(_pcr, X, y, range(1, 6), folds=5, seed=seed)
        hits += res.best == 2
        assert all(not np.isfinite(row["cv_rmse"]) for row in res.table[2:])
    assert hits >= 90


def test_cv_tie_goes_to_larger_lambda():
    X, y = _regression(15)
    lam = 2 * lasso_threshold(X, y)
    res = cross_validate(lambda a, b, v: train_lasso(a, b, LassoConfig(v)), X, y, [lam, 2 * lam], simpler="larger")
    assert res.table[0]["cv_rmse"] == res.table[1]["cv_rmse"]
    assert res.best == 2 * lam


def test_cv_all_values_rejected():
    X, y = _regression(19, n_p=2)
    with pytest.raises(TrainingError):
        cross_validate(_pcr, X, y, [3, 4], folds=3)


def test_cv_errors():
    X, y = _regression(16, n=6)
    with pytest.raises(ValueError):
        cross_validate(_pcr, X, y, [], folds=3)
    with pytest.raises(ValueError):
        cross_validate(_pcr, X, y, [1], folds=1)


def test_cv_is_deterministic():
    X, y = _regression(17)
    a = cross_validate(_pcr, X, y, [1, 2, 3], seed=4)
    b = cross_validate(_pcr, X, y, [1, 2, 3], seed=4)
    assert a.table == b.table


def test_predict_linear_examples():
    assert predict_linear(LinearModel([0.0, 0.0], 2.5), np.zeros((3, 2))).tolist() == [2.5] * 3
    assert predict_linear(LinearModel([1.0, 1.0], 0.0), [2.0, 3.0])[0] == 5.0
    with pytest.raises(ValueError):
        predict_linear(LinearModel([1.0], 0.0), np.zeros((2, 2)))


def test_predict_matches_fitted_values():
    X, y = _regression(18)
    m = train_olsr(X, y)
    A = np.column_stack([X, np.ones(len(y))])
    np.testing.assert_allclose(predict_linear(m, X), A @ np.append(m.a, m.a0), atol=1e-12)


def test_linear_model_rejects_non_finite():
    with pytest.raises(TrainingError):
        LinearModel([np.nan], 0.0)
