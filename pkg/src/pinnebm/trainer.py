"""Staged training of the three model variants.

One training run owns a combined flat parameter vector holding the PINN
weights, the PDE parameters, optionally a data-loss offset, and (after the
switch iteration) the energy-net weights. The loop follows the staged
schedule: least-squares data loss first, then the learned-likelihood data
loss once the noise model has been initialized.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import ebm as ebm_mod
from . import losses
from . import problems as prob_mod
from .autodiff import (
    AdamHyper,
    AdamState,
    ParamLayout,
    ParamVector,
    Tape,
    adam_step,
    backward,
)
from .network import Normalizer, fit_normalizer, init_mlp, mlp_config


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or gradient)."""


class Variant(str, Enum):
    PINN = "pinn"
    PINN_OFF = "pinn-off"
    PINN_EBM = "pinn-ebm"


@dataclass
class TrainConfig:
    n_total: int = 40_000
    i_ebm: int = 4_000
    n_ebm: int = 2_000
    omega: float = 1.0
    lr: float = 0.002
    lr_decay: tuple | None = None  # (factor, at_iteration)
    batch_data: int | None = None  # None = full batch
    batch_colloc: int = 100
    seed: int = 0
    curve_stride: int = 100
    pinn_hidden: int = 4
    pinn_width: int = 40
    ebm_grid_size: int = ebm_mod.DEFAULT_GRID_SIZE
    ebm_grid_margin: float = ebm_mod.DEFAULT_GRID_MARGIN

    def validate(self, variant, dataset):
        if self.n_total < 1:
            raise ValueError("n_total must be positive")
        if variant == Variant.PINN_EBM and not 0 < self.i_ebm:
            raise ValueError("i_ebm must be positive for the EBM variant")
        n_d = dataset.t_train.shape[0]
        n_c = dataset.t_colloc.shape[0]
        if self.batch_data is not None and self.batch_data > n_d:
            raise ValueError("data batch size exceeds dataset size")
        if self.batch_colloc > n_c:
            raise ValueError("collocation batch size exceeds pool size")


@dataclass
class TrainResult:
    variant: Variant
    lam: np.ndarray
    theta0: float | None
    pinn: object
    ebm: object
    curves: np.ndarray          # rows: iteration, data_loss, pde_loss, lam..., [theta0]
    curve_fields: tuple
    switch_iteration: int | None
    wall_time: float
    diagnostics: dict = field(default_factory=dict)


def lr_at(config: TrainConfig, i):
    """Learning rate at iteration i under the optional step decay."""
    if config.lr_decay is None:
        return config.lr
    factor, at_iteration = config.lr_decay
    return config.lr * factor if i >= at_iteration else config.lr


class Minibatcher:
    """Without-replacement minibatch draws; the pool is reshuffled whenever
    fewer than one full batch remains."""

    def __init__(self, pool_size, batch_size, rng):
        if batch_size > pool_size:
            raise ValueError(f"batch size {batch_size} exceeds pool size {pool_size}")
        self.pool_size = pool_size
        self.batch_size = batch_size
        self.rng = rng
        self._perm = None
        self._pos = 0

    def draw(self):
        if self._perm is None or self._pos + self.batch_size > self.pool_size:
            self._perm = self.rng.permutation(self.pool_size)
            self._pos = 0
        out = self._perm[self._pos : self._pos + self.batch_size]
        self._pos += self.batch_size
        return out


def minibatch(pool_size, batch_size, rng):
    """One-shot without-replacement draw of batch_size indices."""
    if batch_size > pool_size:
        raise ValueError(f"batch size {batch_size} exceeds pool size {pool_size}")
    return rng.permutation(pool_size)[:batch_size]


def _build_params(pinn, problem, variant):
    entries = [("pinn." + n, s) for n, s in pinn.params.layout.entries]
    entries.append(("lam", (problem.lambda_dim,)))
    if variant == Variant.PINN_OFF:
        entries.append(("theta0", (1,)))
    params = ParamVector(ParamLayout(entries))
    for name in pinn.params.layout.names():
        params.view("pinn." + name)[...] = pinn.params.view(name)
    params.view("lam")[...] = problem.lambda_init
    return params


def _join_ebm(params, adam, ebm_state):
    entries = list(params.layout.entries) + [
        ("ebm." + n, s) for n, s in ebm_state.net.params.layout.entries
    ]
    joined = ParamVector(ParamLayout(entries))
    joined.data[: len(params)] = params.data
    for name in ebm_state.net.params.layout.names():
        joined.view("ebm." + name)[...] = ebm_state.net.params.view(name)
    return joined, adam.extended(len(joined) - len(params))


def train(problem, dataset, variant, config: TrainConfig) -> TrainResult:
    """Run the full schedule; deterministic given config.seed."""
    variant = Variant(variant)
    config.validate(variant, dataset)
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()

    pinn = init_mlp(
        mlp_config(problem.input_dim, config.pinn_hidden, config.pinn_width,
                   problem.output_dim),
        rng,
    )
    norm_inputs = np.vstack([dataset.t_train, dataset.t_colloc])
    if problem.kind == "ns":
        # outputs are stream function and pressure, whose scales are not
        # directly observed; only the inputs are normalized
        lo, hi = norm_inputs.min(axis=0), norm_inputs.max(axis=0)
        pinn.normalizer = Normalizer(
            (hi + lo) / 2.0, (hi - lo) / 2.0,
            np.zeros(problem.output_dim), np.ones(problem.output_dim),
        )
    else:
        pinn.normalizer = fit_normalizer(norm_inputs, dataset.y_train)

    params = _build_params(pinn, problem, variant)
    adam = AdamState.zeros(len(params))
    ebm_state = None
    switch_iteration = config.i_ebm if variant == Variant.PINN_EBM else None

    n_d = dataset.t_train.shape[0]
    batch_d = n_d if config.batch_data is None else config.batch_data
    data_batcher = Minibatcher(n_d, batch_d, rng)
    colloc_batcher = Minibatcher(dataset.t_colloc.shape[0], config.batch_colloc, rng)

    y_stacked = prob_mod.stack_targets(problem, dataset.y_train)
    curve_fields = ["iteration", "data_loss", "pde_loss"] + [
        f"lam{i}" for i in range(problem.lambda_dim)
    ]
    if variant == Variant.PINN_OFF:
        curve_fields.append("theta0")
    curves = []
    last_row = None

    for i in range(config.n_total):
        if variant == Variant.PINN_EBM and i == config.i_ebm and ebm_state is None:
            residuals0 = _train_residuals(problem, pinn, dataset, params, y_stacked)
            ebm_state = ebm_mod.init_ebm(
                residuals0, config.n_ebm, rng, lr=config.lr,
                grid_size=config.ebm_grid_size, grid_margin=config.ebm_grid_margin,
            )
            params, adam = _join_ebm(params, adam, ebm_state)

        idx_d = data_batcher.draw()
        idx_c = colloc_batcher.draw()
        tape = Tape(params)
        pinn_leaves = tape.leaves("pinn.")
        lam = tape.leaf("lam")

        pred = prob_mod.predict_measured(
            problem, pinn, dataset.t_train[idx_d], pinn_leaves, mode="train", rng=rng
        )
        y_mb = _stacked_rows(problem, y_stacked, idx_d, n_d)
        if ebm_state is not None:
            resid = y_mb - pred
            data_term = ebm_mod.ebm_data_loss(
                resid, ebm_state, tape.leaves("ebm."), mode="train", rng=rng
            )
        elif variant == Variant.PINN_OFF:
            data_term = losses.data_loss_ls_offset(pred, tape.leaf("theta0"), y_mb)
        else:
            data_term = losses.data_loss_ls(pred, y_mb)

        res = prob_mod.residuals(
            problem, pinn, dataset.t_colloc[idx_c], lam, pinn_leaves,
            mode="train", rng=rng,
        )
        pde_term = losses.pde_loss(res)

        if variant == Variant.PINN_EBM:
            omega_eff = config.omega if i >= config.i_ebm else 1.0
        else:
            omega_eff = config.omega
        breakdown = losses.total_loss(data_term, pde_term, omega_eff)
        total = breakdown.total
        if not np.isfinite(float(total.data)):
            raise TrainingError(f"non-finite loss at iteration {i}")

        grads = backward(tape, total)
        adam_step(params, grads, adam, AdamHyper(lr=lr_at(config, i)))

        last_row = _curve_row(i, breakdown, params, problem, variant)
        if i % config.curve_stride == 0:
            curves.append(last_row)

    final_row = list(last_row)
    final_row[0] = config.n_total
    curves.append(tuple(final_row))

    for name in pinn.params.layout.names():
        pinn.params.view(name)[...] = params.view("pinn." + name)
    if ebm_state is not None:
        for name in ebm_state.net.params.layout.names():
            ebm_state.net.params.view(name)[...] = params.view("ebm." + name)

    lam_final = params.view("lam").copy()
    theta0 = float(params.view("theta0")[0]) if "theta0" in params.layout else None
    return TrainResult(
        variant=variant,
        lam=lam_final,
        theta0=theta0,
        pinn=pinn,
        ebm=ebm_state,
        curves=np.asarray(curves, dtype=np.float64),
        curve_fields=tuple(curve_fields),
        switch_iteration=switch_iteration,
        wall_time=time.perf_counter() - t0,
        diagnostics={"n_params_final": len(params)},
    )


def _train_residuals(problem, pinn, dataset, params, y_stacked):
    """Current residuals y - prediction over the full training set (numpy)."""
    leaves = {n: params.view("pinn." + n) for n in pinn.params.layout.names()}
    pred = prob_mod.predict_measured(problem, pinn, dataset.t_train, leaves)
    return (y_stacked - pred).reshape(-1)


def _stacked_rows(problem, y_stacked, idx, n_d):
    if problem.kind in ("exp", "bessel"):
        return y_stacked[idx]
    return np.concatenate([y_stacked[idx], y_stacked[n_d + idx]], axis=0)


def _curve_row(i, breakdown, params, problem, variant):
    row = [float(i), float(breakdown.data_loss.data), float(breakdown.pde_loss.data)]
    row.extend(params.view("lam").tolist())
    if variant == Variant.PINN_OFF:
        row.append(float(params.view("theta0")[0]))
    return tuple(row)
