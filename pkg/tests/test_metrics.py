"""Evaluation metrics against direct hand computations and stubs."""

import numpy as np
import pytest

from pinnebm import autodiff as ad
from pinnebm import ebm as ebm_mod
from pinnebm import metrics
from pinnebm import problems as prob
from pinnebm.trainer import TrainResult, Variant


class StubModel:
    """MLP stand-in whose forward pass is an arbitrary closure; works for
    plain arrays and Jets alike."""

    def __init__(self, fn):
        self._fn = fn

    def apply(self, x, leaves=None, mode="eval", rng=None):
        return self._fn(x)


def _dataset(t_train, y_train, t_val, y_val, x_val_true):
    return prob.Dataset(
        np.asarray(t_train, float).reshape(-1, 1),
        np.asarray(y_train, float).reshape(-1, 1),
        np.asarray(t_val, float).reshape(-1, 1),
        np.asarray(y_val, float).reshape(-1, 1),
        np.asarray(x_val_true, float).reshape(-1, 1),
        np.linspace(0, 10, 50).reshape(-1, 1),
    )


def _result(variant, mlp, lam, theta0=None, ebm=None):
    return TrainResult(
        variant=Variant(variant), lam=np.atleast_1d(np.asarray(lam, float)),
        theta0=theta0, pinn=mlp, ebm=ebm, curves=np.empty((0, 4)),
        curve_fields=(), switch_iteration=None, wall_time=0.0,
    )


def test_delta_lambda_oracles():
    np.testing.assert_allclose(metrics.delta_lambda([0.3], [0.3]), [0.0])
    np.testing.assert_allclose(metrics.delta_lambda([0.312], [0.3]), [0.012])
    np.testing.assert_allclose(
        100 * metrics.delta_lambda([0.312], [0.3]), [1.2], rtol=1e-12
    )
    with pytest.raises(ValueError):
        metrics.delta_lambda([0.3, 0.4], [0.3])


def test_rmse_exact_and_offset():
    p = prob.exp_problem()
    t = np.linspace(0, 2, 5).reshape(-1, 1)
    truth = prob.true_solution(p, t)
    exact = StubModel(lambda x: prob.true_solution_exp(np.asarray(x), 0.3))
    assert metrics.rmse(p, exact, t, truth) == pytest.approx(0.0, abs=1e-12)
    shifted = StubModel(lambda x: prob.true_solution_exp(np.asarray(x), 0.3) + 2.0)
    assert metrics.rmse(p, shifted, t, truth) == pytest.approx(2.0, abs=1e-12)


def test_rmse_matches_hand_computation_on_random_points():
    p = prob.exp_problem()
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 10, size=(5, 1))
    truth = rng.standard_normal((5, 1))
    pred = rng.standard_normal((5, 1))
    model = StubModel(lambda x: pred)
    want = np.sqrt(np.mean((pred - truth) ** 2))
    assert metrics.rmse(p, model, t, truth) == pytest.approx(want, abs=1e-12)


def test_gaussian_nll_formula_and_entropy_anchor():
    eps = np.array([1.0, -1.0, 0.5])
    want = 0.5 * np.log(2 * np.pi * 4.0) + np.mean(eps**2) / 8.0
    assert metrics.gaussian_nll(eps, 0.0, 4.0) == pytest.approx(want, rel=1e-12)
    big = np.random.default_rng(1).standard_normal(200_000)
    anchor = 0.5 * np.log(2 * np.pi) + 0.5  # = 1.4189...
    assert metrics.gaussian_nll(big, 0.0, 1.0) == pytest.approx(anchor, abs=0.01)
    with pytest.raises(ValueError):
        metrics.gaussian_nll(eps, 0.0, 0.0)


def test_nll_validation_centers_on_offset_for_offset_variant():
    p = prob.exp_problem()
    truth_fn = lambda x: prob.true_solution_exp(np.asarray(x), 0.3)
    model = StubModel(truth_fn)
    t = np.linspace(0, 3, 20)
    clean = truth_fn(t.reshape(-1, 1))
    rng = np.random.default_rng(2)
    noisy = clean + 4.0 + 0.5 * rng.standard_normal(clean.shape)
    ds = _dataset(t, noisy, t, noisy, clean)
    nll_plain = metrics.nll_validation(p, ds, _result("pinn", model, 0.3))
    nll_off = metrics.nll_validation(
        p, ds, _result("pinn-off", model, 0.3, theta0=4.0)
    )
    assert nll_off < nll_plain  # correct mean is a much better model


def test_nll_validation_degenerate_residuals_raise():
    p = prob.exp_problem()
    truth_fn = lambda x: prob.true_solution_exp(np.asarray(x), 0.3)
    model = StubModel(truth_fn)
    t = np.linspace(0, 3, 10)
    clean = truth_fn(t.reshape(-1, 1))
    ds = _dataset(t, clean, t, clean, clean)  # residuals identically zero
    with pytest.raises(ValueError):
        metrics.nll_validation(p, ds, _result("pinn", model, 0.3))


def test_nll_validation_ebm_matches_direct_density():
    p = prob.exp_problem()
    truth_fn = lambda x: prob.true_solution_exp(np.asarray(x), 0.3)
    model = StubModel(truth_fn)
    t = np.linspace(0, 3, 15)
    clean = truth_fn(t.reshape(-1, 1))
    rng = np.random.default_rng(3)
    noisy = clean + rng.standard_normal(clean.shape)
    ds = _dataset(t, noisy, t, noisy, clean)
    state = ebm_mod.init_ebm(rng.standard_normal(300), 400, np.random.default_rng(4))
    got = metrics.nll_validation(p, ds, _result("pinn-ebm", model, 0.3, ebm=state))
    eps = (noisy - clean).reshape(-1)
    want = -np.mean(np.log(np.maximum(ebm_mod.ebm_pdf(state, eps, clamp=True), 1e-300)))
    assert got == pytest.approx(want, abs=1e-6)


def test_f2_vanishes_for_exact_solution_and_true_parameter():
    p = prob.exp_problem()
    model = StubModel(lambda x: ad.exp(0.3 * x))
    ds = _dataset([0.0, 10.0], [1.0, 1.0], [1.0], [1.0], [1.0])
    assert metrics.f2_train(p, model, [0.3], ds) < 1e-10


def test_f2_of_constant_prediction():
    # x' - lam x with constant prediction c: residual = -lam c, f2 = (lam c)^2
    p = prob.exp_problem()
    c = 2.0
    model = StubModel(lambda x: x * 0.0 + c)
    ds = _dataset([0.0, 10.0], [1.0, 1.0], [1.0], [1.0], [1.0])
    assert metrics.f2_train(p, model, [0.3], ds) == pytest.approx(
        (0.3 * c) ** 2, rel=1e-12
    )


def test_f2_invariant_to_training_point_order():
    p = prob.exp_problem()
    model = StubModel(lambda x: ad.exp(0.25 * x))
    t = np.array([0.0, 3.0, 10.0, 7.0])
    a = metrics.f2_train(p, model, [0.3], _dataset(t, t, [1.0], [1.0], [1.0]))
    b = metrics.f2_train(p, model, [0.3], _dataset(t[::-1], t, [1.0], [1.0], [1.0]))
    assert a == pytest.approx(b, rel=1e-12)


def test_aggregate_oracles():
    assert metrics.aggregate([2.0, 2.0, 2.0]) == (2.0, 0.0)
    mean, std = metrics.aggregate([1.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert std == pytest.approx(np.sqrt(2.0))  # sample std of {1, 3}
    vals = np.random.default_rng(5).standard_normal(10)
    mean, std = metrics.aggregate(vals)
    assert mean == pytest.approx(vals.mean(), rel=1e-12)
    assert std == pytest.approx(vals.std(ddof=1), rel=1e-12)
    single_mean, single_std = metrics.aggregate([4.2])
    assert (single_mean, single_std) == (4.2, 0.0)
    with pytest.raises(ValueError):
        metrics.aggregate([])
