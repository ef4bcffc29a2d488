"""Data and PDE loss terms and their weighted combination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


class EmptyBatchError(ValueError):
    """A loss was asked to average over zero points."""


@dataclass
class LossBreakdown:
    """Components of one total-loss evaluation. The fields hold the live
    tape nodes; use float() or .data for the numbers."""

    data_loss: object
    pde_loss: object
    total: object
    omega_used: float


def _size(x):
    return x.data.size if isinstance(x, ad.Value) else np.asarray(x).size


def data_loss_ls(predictions, targets):
    """Mean squared error between predictions and measurement targets."""
    if _size(predictions) == 0:
        raise EmptyBatchError("no data points in minibatch")
    diff = predictions - np.asarray(targets, dtype=np.float64)
    return (diff * diff).mean()


def data_loss_ls_offset(predictions, theta0, targets):
    """Least squares with a trainable constant offset added to the
    prediction; the offset never enters the PDE term."""
    if _size(predictions) == 0:
        raise EmptyBatchError("no data points in minibatch")
    diff = (predictions + theta0) - np.asarray(targets, dtype=np.float64)
    return (diff * diff).mean()


def pde_loss(residuals):
    """Mean of squared PDE residuals over the collocation minibatch.

    Accepts a single stacked node or a list of residual channels (both
    Navier-Stokes momentum residuals enter the same mean)."""
    if isinstance(residuals, (list, tuple)):
        if not residuals:
            raise EmptyBatchError("no collocation residuals")
        residuals = ad.concat_rows(list(residuals))
    if _size(residuals) == 0:
        raise EmptyBatchError("no collocation residuals")
    return (residuals * residuals).mean()


def total_loss(data, pde, omega) -> LossBreakdown:
    if omega < 0:
        raise ValueError("PDE weight must be nonnegative")
    return LossBreakdown(data, pde, data + omega * pde, float(omega))
