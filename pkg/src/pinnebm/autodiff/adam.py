"""Adam optimizer over flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import LayoutError, ParamVector


@dataclass
class AdamHyper:
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @staticmethod
    def zeros(n):
        return AdamState(np.zeros(n), np.zeros(n))

    def extended(self, extra):
        """State for a parameter vector grown by `extra` entries; the new
        entries start with fresh (zero) moments."""
        return AdamState(
            np.concatenate([self.m, np.zeros(extra)]),
            np.concatenate([self.v, np.zeros(extra)]),
            self.step,
        )


def adam_step(params: ParamVector, grads: ParamVector, state: AdamState, hyper: AdamHyper):
    """One bias-corrected Adam update, in place. Returns (params, state)."""
    if params.layout != grads.layout:
        raise LayoutError("params and grads have different layouts")
    if state.m.shape != params.data.shape:
        raise LayoutError("optimizer state does not match parameter layout")
    state.step += 1
    b1, b2 = hyper.beta1, hyper.beta2
    g = grads.data
    state.m *= b1
    state.m += (1.0 - b1) * g
    state.v *= b2
    state.v += (1.0 - b2) * (g * g)
    m_hat = state.m / (1.0 - b1 ** state.step)
    v_hat = state.v / (1.0 - b2 ** state.step)
    params.data -= hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return params, state
