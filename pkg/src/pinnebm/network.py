"""Fully-connected tanh networks with input/output normalization.

The same MLP class backs both the PDE solution network and the energy
network of the noise model. Parameters live in a flat ParamVector; forward
passes accept plain arrays, tape Values, or Jets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamLayout, ParamVector


class DegenerateDataError(ValueError):
    """Normalization target has zero range in some dimension."""


@dataclass(frozen=True)
class MLPConfig:
    """layer_widths lists every layer including input and output,
    e.g. (1, 40, 40, 40, 40, 1) is four hidden layers of width 40."""

    layer_widths: tuple
    dropout_before_last: float = 0.0

    def __post_init__(self):
        if len(self.layer_widths) < 3:
            raise ValueError("need at least one hidden layer")
        if any(w < 1 for w in self.layer_widths):
            raise ValueError("layer widths must be positive")
        if not 0.0 <= self.dropout_before_last < 1.0:
            raise ValueError("dropout probability must lie in [0, 1)")

    def layout(self):
        entries = []
        widths = self.layer_widths
        for i in range(len(widths) - 1):
            entries.append((f"W{i}", (widths[i], widths[i + 1])))
            entries.append((f"b{i}", (widths[i + 1],)))
        return ParamLayout(entries)

    @property
    def n_linear(self):
        return len(self.layer_widths) - 1


def mlp_config(in_dim, hidden_layers, width, out_dim, dropout_before_last=0.0):
    widths = (in_dim,) + (width,) * hidden_layers + (out_dim,)
    return MLPConfig(widths, dropout_before_last)


@dataclass
class Normalizer:
    """Affine maps taking raw inputs/outputs to roughly [-1, 1] and back."""

    input_shift: np.ndarray
    input_scale: np.ndarray
    output_shift: np.ndarray
    output_scale: np.ndarray

    def __post_init__(self):
        for scale in (self.input_scale, self.output_scale):
            if np.any(np.asarray(scale) <= 0):
                raise DegenerateDataError("normalizer scales must be positive")

    @staticmethod
    def identity(in_dim, out_dim):
        return Normalizer(
            np.zeros(in_dim), np.ones(in_dim), np.zeros(out_dim), np.ones(out_dim)
        )

    def apply_input(self, x):
        return (x - self.input_shift) * (1.0 / self.input_scale)

    def invert_input(self, z):
        return z * self.input_scale + self.input_shift

    def apply_output(self, y):
        return (y - self.output_shift) * (1.0 / self.output_scale)

    def invert_output(self, z):
        return z * self.output_scale + self.output_shift


def fit_normalizer(inputs, outputs):
    """Affine maps sending each dimension's sample min/max to [-1, 1]."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    if inputs.size == 0 or outputs.size == 0:
        raise DegenerateDataError("cannot fit a normalizer on empty samples")

    def shift_scale(arr):
        lo = arr.min(axis=0)
        hi = arr.max(axis=0)
        if np.any(hi - lo <= 0):
            raise DegenerateDataError("zero range in some dimension")
        return (hi + lo) / 2.0, (hi - lo) / 2.0

    in_shift, in_scale = shift_scale(inputs)
    out_shift, out_scale = shift_scale(outputs)
    return Normalizer(in_shift, in_scale, out_shift, out_scale)


@dataclass
class MLP:
    config: MLPConfig
    params: ParamVector
    normalizer: Normalizer

    def apply(self, x, leaves=None, mode="eval", rng=None):
        """Forward pass. `x` may be an ndarray, Value, or Jet of shape (N, in).

        `leaves` supplies the weights (tape Values during training, arrays
        otherwise); defaults to this network's own parameter views.
        Dropout uses inverted scaling, so eval mode needs no rescaling.
        """
        if mode not in ("train", "eval"):
            raise ValueError(f"unknown mode {mode!r}")
        if leaves is None:
            leaves = {n: self.params.view(n) for n in self.params.layout.names()}
        in_dim = self.config.layer_widths[0]
        shape = x.data.shape if isinstance(x, ad.Value) else getattr(x, "shape", None)
        if shape is not None and shape[-1] != in_dim:
            raise ad.StructuralError(
                f"input dim {shape[-1]} does not match config {in_dim}"
            )
        norm = self.normalizer
        h = (x - norm.input_shift) * (1.0 / norm.input_scale)
        n_lin = self.config.n_linear
        p_drop = self.config.dropout_before_last
        for i in range(n_lin):
            h = ad.matmul(h, leaves[f"W{i}"]) + leaves[f"b{i}"]
            if i < n_lin - 1:
                h = ad.tanh(h)
            if i == n_lin - 2 and p_drop > 0.0 and mode == "train":
                if rng is None:
                    raise ValueError("train-mode dropout needs an rng")
                width = self.config.layer_widths[i + 1]
                rows = _batch_rows(h)
                mask = (rng.random((rows, width)) >= p_drop) / (1.0 - p_drop)
                h = h * mask
        return h * norm.output_scale + norm.output_shift

    def forward(self, t, mode="eval", rng=None):
        """Pure-numpy convenience forward on raw arrays."""
        return self.apply(np.atleast_2d(np.asarray(t, dtype=np.float64)), mode=mode, rng=rng)

    @property
    def n_params(self):
        return len(self.params)


def _batch_rows(h):
    if isinstance(h, ad.Value):
        return h.data.shape[0]
    if isinstance(h, ad.Jet):
        v = h.value
        return v.data.shape[0] if isinstance(v, ad.Value) else np.asarray(v).shape[0]
    return np.asarray(h).shape[0]


def init_mlp(config: MLPConfig, rng) -> MLP:
    """Glorot-uniform weights, zero biases; deterministic given the rng."""
    layout = config.layout()
    pv = ParamVector(layout)
    widths = config.layer_widths
    for i in range(config.n_linear):
        fan_in, fan_out = widths[i], widths[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        pv.view(f"W{i}")[...] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    return MLP(config, pv, Normalizer.identity(widths[0], widths[-1]))


def save_params(path, pv: ParamVector):
    """Layout header (one JSON line) followed by little-endian float64s."""
    header = json.dumps({"layout": [[n, list(s)] for n, s in pv.layout.entries]})
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(pv.data.astype("<f8").tobytes())


def load_params(path) -> ParamVector:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        layout = ParamLayout([(n, tuple(s)) for n, s in header["layout"]])
        data = np.frombuffer(fh.read(), dtype="<f8")
    return ParamVector(layout, data.copy())
