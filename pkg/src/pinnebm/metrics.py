"""Evaluation metrics for a trained run and their replica aggregation.

Four figures of merit:
  * percentage error of the recovered equation parameters,
  * RMSE of the prediction against the noiseless validation signal,
  * negative log-likelihood of validation residuals under each variant's
    own noise model,
  * mean squared PDE residual, with the learned parameters, on a fresh
    dense grid spanning the training inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ebm as ebm_mod
from . import problems as prob_mod
from .trainer import TrainResult, Variant

F2_GRID_POINTS = 500
_PDF_FLOOR = 1e-300


@dataclass
class RunMetrics:
    variant: Variant
    delta_lambda_pct: np.ndarray   # 100 * |lam_hat - lam_true|, per component
    rmse: float
    nll: float
    f2: float                      # mean squared residual at the learned parameters

    def as_row(self):
        row = {f"dlam{i}_pct": float(v) for i, v in enumerate(self.delta_lambda_pct)}
        row.update(rmse=self.rmse, nll=self.nll, f2=self.f2)
        return row


def delta_lambda(learned, true):
    """|estimated - true| per equation parameter (tables show 100x this)."""
    learned = np.asarray(learned, dtype=np.float64).reshape(-1)
    true = np.asarray(true, dtype=np.float64).reshape(-1)
    if learned.shape != true.shape:
        raise ValueError("parameter vectors have different lengths")
    return np.abs(learned - true)


def delta_lambda_pct(problem, lam):
    return 100.0 * delta_lambda(lam, problem.true_lambda)


def rmse(problem, mlp, t, x_true):
    """Root mean squared error against noiseless measured channels."""
    pred = prob_mod.predict_measured(problem, mlp, t)
    target = prob_mod.stack_targets(problem, x_true)
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def _validation_residuals(problem, mlp, dataset):
    pred = prob_mod.predict_measured(problem, mlp, dataset.t_val)
    return (prob_mod.stack_targets(problem, dataset.y_val) - pred).reshape(-1)


def _training_residuals(problem, mlp, dataset):
    pred = prob_mod.predict_measured(problem, mlp, dataset.t_train)
    return (prob_mod.stack_targets(problem, dataset.y_train) - pred).reshape(-1)


def gaussian_nll(eps, mean, var):
    """Mean negative log density of N(mean, var) at the residuals."""
    if var <= 0:
        raise ValueError("variance must be positive")
    eps = np.asarray(eps, dtype=np.float64)
    return float(
        0.5 * np.log(2.0 * np.pi * var) + np.mean((eps - mean) ** 2) / (2.0 * var)
    )


def nll_validation(problem, dataset, result: TrainResult):
    """Validation NLL under the noise model each variant implies.

    Plain least squares corresponds to a zero-mean Gaussian, the offset
    variant to a Gaussian centered at the offset, and the EBM variant to
    its learned density. Gaussian variances are fitted on the training
    residuals about the respective center."""
    eps_val = _validation_residuals(problem, result.pinn, dataset)
    if result.variant == Variant.PINN_EBM:
        dens = ebm_mod.ebm_pdf(result.ebm, eps_val, clamp=True)
        return float(-np.mean(np.log(np.maximum(dens, _PDF_FLOOR))))
    eps_train = _training_residuals(problem, result.pinn, dataset)
    center = result.theta0 if result.variant == Variant.PINN_OFF else 0.0
    var = float(np.mean((eps_train - center) ** 2))
    return gaussian_nll(eps_val, center, var)


def f2_train(problem, mlp, lam, dataset, n_grid=F2_GRID_POINTS):
    """Mean squared PDE residual, using the learned parameters, on a fresh
    uniform grid spanning the training input range.

    For the 3-D problem a seeded uniform sample of the training bounding
    box stands in for the grid, keeping the metric deterministic."""
    lo = dataset.t_train.min(axis=0)
    hi = dataset.t_train.max(axis=0)
    if problem.input_dim == 1:
        grid = np.linspace(float(lo[0]), float(hi[0]), n_grid).reshape(-1, 1)
    else:
        grid_rng = np.random.default_rng(0)
        grid = grid_rng.uniform(lo, hi, size=(n_grid, problem.input_dim))
    res = prob_mod.residuals(problem, mlp, grid, np.asarray(lam))
    return float(np.mean(np.asarray(res) ** 2))


def evaluate(problem, dataset, result: TrainResult) -> RunMetrics:
    return RunMetrics(
        variant=result.variant,
        delta_lambda_pct=delta_lambda_pct(problem, result.lam),
        rmse=rmse(problem, result.pinn, dataset.t_val, dataset.x_val_true),
        nll=nll_validation(problem, dataset, result),
        f2=f2_train(problem, result.pinn, result.lam, dataset),
    )


def aggregate(values):
    """(mean, sample std) across replicas; std is 0 for a single replica."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("nothing to aggregate")
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return mean, std
