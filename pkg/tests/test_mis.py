import json
from dataclasses import replace

import numpy as np
import pytest

from infsens.classify import Hyperplane
from infsens.dataset import PctParams, Regime, apply_normalization, generate_pct_dataset, pct_box_normalization
from infsens.labeling import Labels
from infsens.mis import (
    MisConfig,
    MultiModel,
    big_m_bounds,
    build_con_lab_milp,
    build_con_qp,
    continuity_gap,
    labeling_objective,
    label_local_search,
    max_affine_starts,
    predict_mis,
    train_mis_con,
    train_mis_con_lab,
    train_mis_sota,
)
from infsens.optim import MilpOptions, solve_milp
from infsens.sis import LinearModel, TrainingError, default_a_bar, predict_linear, train_olsr

from oracles import con_grid_min, labeling_enumeration, labeling_lp_value

T_FULL = (523.2, 573.2)


def _pct_two_regime(seed, n_per=20, sigma=5.0):
    regs = [Regime(T_FULL, (0.4, 4.5), n_per), Regime(T_FULL, (11.0, 15.0), n_per)]
    ds, _ = generate_pct_dataset(PctParams(noise_sigma=sigma, seed=seed), regs)
    nd = apply_normalization(ds, pct_box_normalization())
    return nd.inputs, nd.output


def _kink(seed, n=8, noise=0.03):
    rng = np.random.default_rng(seed)
    m = np.sort(rng.uniform(0, 1, n))
    y = np.maximum(0.9 * m, 0.9 - 1.2 * m) + noise * rng.normal(size=n)
    return m, y


# ---------------------------------------------------------------- state of the art


def test_sota_submodels_are_per_class_olsr():
    X, y = _pct_two_regime(1)
    mm = train_mis_sota(X, y)
    z = mm.labels.z
    for model, rows in ((mm.model1, z == 1), (mm.model2, z == 0)):
        ref = train_olsr(X[rows], y[rows])
        assert model.a.tobytes() == ref.a.tobytes()
        assert model.a0 == ref.a0


def test_sota_on_single_plane_recovers_plane():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(60, 2))
    y = 0.4 * X[:, 0] - 0.3 * X[:, 1] + 0.2 + 0.005 * rng.normal(size=60)
    mm = train_mis_sota(X, y)
    for model in (mm.model1, mm.model2):
        np.testing.assert_allclose(model.a, [0.4, -0.3], atol=0.05)


def test_sota_is_discontinuous_on_two_regime_pct():
    X, y = _pct_two_regime(3, n_per=40)
    assert continuity_gap(train_mis_sota(X, y)) > 0.01


def test_sota_refuses_tiny_clusters():
    X = np.vstack([np.zeros((1, 1)), np.ones((10, 1)) + np.arange(10)[:, None] * 0.01])
    y = X[:, 0].copy()
    with pytest.raises(TrainingError):
        train_mis_sota(X, y, labels=Labels([1] + [2] * 10, 2))


# ---------------------------------------------------------------- continuous, fixed labels


def test_six_point_instance_matches_grid():
    m = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    y = np.array([0.62, 0.41, 0.22, 0.28, 0.55, 0.79])
    labels = Labels([2, 2, 2, 1, 1, 1], 2)
    cfg = MisConfig(alpha=1e-3, beta=0.07)
    mm = train_mis_con(m[:, None], y, labels, cfg)
    assert mm.meta["kkt_residual"] <= 1e-7
    grid = con_grid_min(m, y, labels.z, cfg.alpha, cfg.beta)
    assert mm.objective + y @ y == pytest.approx(grid, abs=1e-6)


def test_con_exact_plane_gives_equal_models():
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(20, 1))
    y = 0.5 * X[:, 0] + 0.1
    labels = Labels(np.where(X[:, 0] > 0.5, 1, 2), 2)
    # the slack penalty bends the models towards a margin; when it is tiny
    # both models sit on the plane
    mm = train_mis_con(X, y, labels, MisConfig(alpha=1e-9, beta=1e-9))
    np.testing.assert_allclose(predict_mis(mm, X), y, atol=1e-5)
    assert continuity_gap(mm) <= 1e-8
    bent = train_mis_con(X, y, labels, MisConfig(beta=0.07))
    assert continuity_gap(bent) <= 1e-8


def test_con_continuity_and_boundary_agreement():
    X, y = _pct_two_regime(5)
    mm = train_mis_con(X, y, train_mis_sota(X, y).labels, MisConfig())
    dv, d0 = mm.continuity_residual()
    assert dv <= 1e-7 and d0 <= 1e-7
    assert continuity_gap(mm, probes=1000) <= 1e-8


def test_con_needs_two_classes():
    X, y = _pct_two_regime(6)
    with pytest.raises(TrainingError):
        train_mis_con(X, y, Labels(np.ones(len(y), dtype=int), 2))


def test_con_qp_is_well_formed():
    X, y = _pct_two_regime(7)
    z = (X[:, 1] > 0.5).astype(float)
    qp = build_con_qp(X, y, z, 1e-3, 0.07)
    assert qp.n == 3 * 2 + 3 + len(y)
    assert qp.A_eq.shape == (3, qp.n)


# ---------------------------------------------------------------- optimized labeling


@pytest.mark.parametrize("seed", range(3))
def test_labeling_milp_matches_enumeration(seed):
    m, y = _kink(seed)
    cfg = MisConfig()
    lm = build_con_lab_milp(m[:, None], y, cfg.alpha, cfg.beta)
    sol = solve_milp(lm.problem, MilpOptions(rel_gap=1e-10))
    expected = labeling_enumeration(m, y, cfg.alpha, cfg.beta, lm.a_bar, lm.offset_bound)
    assert sol.objective == pytest.approx(expected, abs=1e-6)


def test_fixed_label_lp_agrees_with_oracle_lp():
    m, y = _kink(11)
    z = (m > 0.45).astype(float)
    a_bar = default_a_bar(m[:, None], y)
    b0, _ = big_m_bounds(m[:, None], y, a_bar)
    got = labeling_objective(m[:, None], y, z, 1e-3, 0.07, a_bar, b0)
    assert got == pytest.approx(labeling_lp_value(m, y, z, 1e-3, 0.07, a_bar, b0), abs=1e-8)


def test_big_m_dominates_every_row():
    rng = np.random.default_rng(12)
    X = rng.uniform(size=(10, 2))
    y = rng.uniform(size=10)
    a_bar = 3.0
    b0, M = big_m_bounds(X, y, a_bar)
    mx = np.abs(X).sum(axis=1).max()
    # any boxed model's residual and any continuous switch's margin row fit under M
    assert M >= np.abs(y).max() + a_bar * mx + b0
    assert M >= 1 + 2 * a_bar * mx + 2 * b0


def test_local_search_never_increases():
    m, y = _kink(13, n=20)
    cfg = MisConfig()
    a_bar = default_a_bar(m[:, None], y)
    b0, _ = big_m_bounds(m[:, None], y, a_bar)
    _, _, hist = label_local_search(m[:, None], y, (m > 0.8).astype(float), cfg, a_bar, b0)
    assert all(b < a for a, b in zip(hist, hist[1:]))


def test_max_affine_starts_find_the_kink():
    m, y = _kink(14, n=40, noise=0.0)
    best = max_affine_starts(m[:, None], y, 16, seed=0)[0]
    kink = 0.9 / 2.1
    expected = (m >= kink).astype(float)
    assert np.array_equal(best, expected) or np.array_equal(best, 1 - expected)


def test_con_lab_improves_on_warm_start_and_stays_continuous():
    X, y = _pct_two_regime(8)
    cfg = MisConfig()
    warm = train_mis_con(X, y, train_mis_sota(X, y, cfg=cfg).labels, cfg)
    mm = train_mis_con_lab(X, y, cfg, warm=warm)
    assert mm.meta["milp_objective"] <= mm.meta["warm_objective"] + 1e-9
    dv, d0 = mm.continuity_residual()
    assert max(dv, d0) <= 1e-7
    assert continuity_gap(mm) <= 1e-6
    assert mm.meta["rmse_train"] <= warm.meta["rmse_train"] + 1e-9


def test_con_lab_fallback_when_class_empties():
    rng = np.random.default_rng(15)
    X = rng.uniform(size=(12, 1))
    y = 0.3 * X[:, 0] + 0.2  # one plane: the optimum puts every row in one class
    with pytest.warns(RuntimeWarning, match="falling back"):
        mm = train_mis_con_lab(X, y, MisConfig(multistart=0))
    assert mm.meta["fallback"] == "single_model"
    np.testing.assert_allclose(predict_mis(mm, X), predict_linear(train_olsr(X, y), X))
    dv, d0 = mm.continuity_residual()
    assert max(dv, d0) <= 1e-7


# ---------------------------------------------------------------- prediction and serialization


def _manual():
    return MultiModel(
        LinearModel([1.0, 0.5], 0.2),
        LinearModel([0.0, 1.5], -0.3),
        Hyperplane([1.0, -1.0], 0.5),
        Labels([1, 2], 2),
        "con",
    )


def test_prediction_switch_rule():
    mm = _manual()
    m = np.array([[4.5, 0.0]])  # score +5
    assert predict_mis(mm, m)[0] == predict_linear(mm.model1, m)[0]
    on_plane = np.array([[0.5, 1.0]])  # score 0, continuous by construction
    assert predict_linear(mm.model1, on_plane)[0] == pytest.approx(predict_linear(mm.model2, on_plane)[0], abs=1e-8)


def test_batch_equals_loop():
    mm = _manual()
    M = np.random.default_rng(0).uniform(-2, 2, size=(50, 2))
    loop = np.array([predict_mis(mm, row)[0] for row in M])
    np.testing.assert_array_equal(predict_mis(mm, M), loop)


def test_swap_symmetry():
    mm = _manual()
    M = np.random.default_rng(1).uniform(-2, 2, size=(200, 2))
    np.testing.assert_allclose(predict_mis(mm.swapped(), M), predict_mis(mm, M), atol=0, rtol=0)


def test_piecewise_continuity_along_segment():
    mm = _manual()
    p0, p1 = np.array([-2.0, 1.0]), np.array([2.0, -1.0])
    s0 = mm.boundary.score(p0)[0]
    s1 = mm.boundary.score(p1)[0]
    t = s0 / (s0 - s1)
    eps = 1e-9
    pair = np.vstack([p0 + (t - eps) * (p1 - p0), p0 + (t + eps) * (p1 - p0)])
    vals = predict_mis(mm, pair)
    assert abs(vals[0] - vals[1]) <= 1e-6


def test_gap_of_identical_models_is_zero():
    m = LinearModel([0.3], 0.1)
    mm = MultiModel(m, m, Hyperplane([1.0], -0.5), Labels([1, 2], 2), "sota")
    assert continuity_gap(mm) == 0.0
    with pytest.raises(ValueError):
        continuity_gap(mm, probes=0)


def test_json_round_trip_is_bit_exact():
    X, y = _pct_two_regime(9)
    mm = train_mis_con(X, y, train_mis_sota(X, y).labels, MisConfig())
    back = MultiModel.from_json(mm.to_json())
    assert predict_mis(back, X).tobytes() == predict_mis(mm, X).tobytes()
    doc = json.loads(mm.to_json())
    assert set(doc) >= {"method", "a1", "a01", "a2", "a02", "w", "w0", "labels", "normalization", "meta"}


def test_config_validation():
    with pytest.raises(ValueError):
        MisConfig(alpha=0.0)
    with pytest.raises(ValueError):
        MisConfig(big_m=-1.0)


def test_dimension_disagreement_rejected():
    with pytest.raises(ValueError):
        replace(_manual(), boundary=Hyperplane([1.0], 0.0))
