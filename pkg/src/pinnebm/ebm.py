"""Energy-based model of the measurement-noise density.

A small tanh network maps a normalized residual z to a scalar energy h(z).
The density over raw residuals is exp(h(z)) / (Z * sigma_norm) with Z the
trapezoidal quadrature of exp(h) over a fixed grid. The grid and the
residual normalizer are fitted once, at initialization, and frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamHyper, AdamState, Tape, adam_step, backward
from .network import MLP, init_mlp, mlp_config


class EBMInitError(RuntimeError):
    """Initialization failed its convergence check after all retries."""


class DegenerateResidualsError(ValueError):
    """Residuals have no spread; no density can be fitted."""


DEFAULT_GRID_SIZE = 201
DEFAULT_GRID_MARGIN = 3.0
DEFAULT_TAU_CONV = 1e-3
DEFAULT_MAX_RETRIES = 3


@dataclass
class EBMState:
    net: MLP
    shift: float            # residual normalizer: z = (eps - shift) / scale
    scale: float
    grid: np.ndarray        # strictly increasing quadrature nodes, normalized units
    diagnostics: dict = field(default_factory=dict)

    def normalize(self, eps):
        return (eps - self.shift) * (1.0 / self.scale)

    def denormalize(self, z):
        return z * self.scale + self.shift


def trapezoid_weights(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.shape[0] < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be 1-d and strictly increasing")
    w = np.empty_like(grid)
    w[1:-1] = (grid[2:] - grid[:-2]) / 2.0
    w[0] = (grid[1] - grid[0]) / 2.0
    w[-1] = (grid[-1] - grid[-2]) / 2.0
    return w


def _grid_energies(state, leaves, mode, rng):
    grid_in = state.grid.reshape(-1, 1)
    return state.net.apply(grid_in, leaves, mode=mode, rng=rng)


def log_partition(state, leaves=None, mode="eval", rng=None):
    """log of the trapezoidal quadrature of exp(h) over the grid.

    The running maximum of h is subtracted before exponentiating, so the
    integral never overflows; the shift cancels exactly in the gradient."""
    h = _grid_energies(state, leaves, mode, rng)
    w = trapezoid_weights(state.grid).reshape(-1, 1)
    h_data = h.data if isinstance(h, ad.Value) else h
    m = float(np.max(h_data))
    if not np.isfinite(m):
        raise ad.NumericError("non-finite energy on quadrature grid")
    total = (ad.exp(h - m) * w).sum()
    return ad.log(total) + m


def partition(state, leaves=None, mode="eval", rng=None):
    """Quadrature value of the partition integral (normalized units)."""
    return ad.exp(log_partition(state, leaves, mode=mode, rng=rng))


def ebm_data_loss(residuals, state, leaves=None, mode="eval", rng=None):
    """Mean negative log-likelihood of raw residuals under the model.

    Includes the change-of-variables constant log(scale), so values are
    comparable with densities over raw residuals. Residuals outside the
    grid are clamped to its endpoints and counted in state.diagnostics."""
    data = residuals.data if isinstance(residuals, ad.Value) else np.asarray(residuals)
    if data.size == 0:
        raise ValueError("empty residual minibatch")
    z = (residuals - state.shift) * (1.0 / state.scale)
    lo, hi = float(state.grid[0]), float(state.grid[-1])
    z_data = z.data if isinstance(z, ad.Value) else z
    clipped = int(np.sum((z_data < lo) | (z_data > hi)))
    if clipped:
        state.diagnostics["clipped"] = state.diagnostics.get("clipped", 0) + clipped
    z = z.clip(lo, hi) if isinstance(z, ad.Value) else np.clip(z, lo, hi)
    h = state.net.apply(z, leaves, mode=mode, rng=rng)
    log_z = log_partition(state, leaves, mode=mode, rng=rng)
    return log_z - h.mean() + np.log(state.scale)


def ebm_pdf(state, eps, clamp=False):
    """Learned density over raw residuals (numpy, no dropout).

    Outside the grid the density is 0 by definition; with clamp=True the
    endpoint value is used instead (for likelihood evaluation)."""
    eps = np.asarray(eps, dtype=np.float64).reshape(-1, 1)
    z = state.normalize(eps)
    lo, hi = float(state.grid[0]), float(state.grid[-1])
    inside = (z >= lo) & (z <= hi)
    zc = np.clip(z, lo, hi)
    h = state.net.apply(zc)
    log_z = log_partition(state)
    dens = np.exp(h - log_z) / state.scale
    if not clamp:
        dens = np.where(inside, dens, 0.0)
    return dens[:, 0]


def pdf_on_grid(state):
    """(raw residual grid, density) arrays for export and plotting."""
    eps = state.denormalize(state.grid)
    return eps, ebm_pdf(state, eps)


def init_ebm(
    residuals,
    n_iters,
    rng,
    lr=0.002,
    hidden_layers=3,
    width=5,
    dropout=0.5,
    grid_size=DEFAULT_GRID_SIZE,
    grid_margin=DEFAULT_GRID_MARGIN,
    tau_conv=DEFAULT_TAU_CONV,
    max_retries=DEFAULT_MAX_RETRIES,
) -> EBMState:
    """Fit normalizer and grid, then train the energy net alone.

    After training, the density must have decayed below tau_conv times its
    peak at both grid endpoints; on failure the iteration count is doubled
    and training continues, up to max_retries times."""
    residuals = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if residuals.size < 2:
        raise DegenerateResidualsError("need at least two residuals")
    shift = float(residuals.mean())
    scale = float(residuals.std())
    if scale == 0.0:
        raise DegenerateResidualsError("residuals have zero spread")
    z = (residuals - shift) / scale
    grid = np.linspace(z.min() - grid_margin, z.max() + grid_margin, grid_size)
    net = init_mlp(mlp_config(1, hidden_layers, width, 1, dropout), rng)
    state = EBMState(net, shift, scale, grid)

    raw = residuals.reshape(-1, 1)
    adam = AdamState.zeros(len(net.params))
    hyper = AdamHyper(lr=lr)
    total_iters = 0
    budget = n_iters
    loss0 = None
    for attempt in range(max_retries + 1):
        for _ in range(budget):
            tape = Tape(net.params)
            loss = ebm_data_loss(raw, state, tape.leaves(), mode="train", rng=rng)
            if loss0 is None:
                loss0 = float(loss.data)
            grads = backward(tape, loss)
            adam_step(net.params, grads, adam, hyper)
        total_iters += budget
        if _endpoints_converged(state, tau_conv):
            final = float(np.asarray(ebm_data_loss(raw, state)))
            state.diagnostics.update(
                iterations=total_iters, retries=attempt,
                loss_initial=loss0, loss_final=final,
            )
            return state
        budget *= 2
    eps, dens = pdf_on_grid(state)
    raise EBMInitError(
        f"density endpoints did not decay after {total_iters} iterations; "
        f"endpoint densities ({dens[0]:.3e}, {dens[-1]:.3e}), peak {dens.max():.3e}"
    )


def _endpoints_converged(state, tau_conv):
    _, dens = pdf_on_grid(state)
    peak = dens.max()
    return dens[0] < tau_conv * peak and dens[-1] < tau_conv * peak
