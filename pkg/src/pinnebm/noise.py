"""Homogeneous measurement-noise families: sampling, densities, moments.

Four named families are supported: a single Gaussian (G), a uniform
distribution (u), a three-component Gaussian mixture (3G), and the same
mixture shifted to zero mean (3G0). The effective noise variable is
strength * base_scale * (draw from the base distribution).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)

# Base-distribution parameters, before any scaling.
_MIX_3G = ((1.0 / 3.0, 0.0, 2.0), (1.0 / 3.0, 4.0, 4.0), (1.0 / 3.0, 8.0, 0.5))
_MEAN_3G = 4.0  # (0 + 4 + 8) / 3
_UNIFORM = (0.0, 10.0)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    components: tuple  # mixture: ((weight, mean, std), ...); uniform: (low, high)
    base_scale: float = 1.0  # per-problem factor
    strength: float = 1.0    # sweepable factor

    @property
    def scale(self):
        return self.strength * self.base_scale

    @property
    def is_uniform(self):
        return self.kind == "u"


def make_noise(kind, base_scale=1.0, strength=1.0):
    if kind == "G":
        components = ((1.0, 0.0, 2.5),)
    elif kind == "u":
        components = _UNIFORM
    elif kind == "3G":
        components = _MIX_3G
    elif kind == "3G0":
        # location-shift every component by the analytic mixture mean
        components = tuple((w, m - _MEAN_3G, s) for w, m, s in _MIX_3G)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return NoiseSpec(kind, components, base_scale, strength)


def gaussian_noise(mean, std, base_scale=1.0, strength=1.0):
    """Single-Gaussian spec with explicit location, e.g. a biased sensor."""
    return NoiseSpec("G", ((1.0, float(mean), float(std)),), base_scale, strength)


def sample(spec: NoiseSpec, n, rng):
    """n i.i.d. draws from the scaled density."""
    if n < 0:
        raise ValueError("sample count must be nonnegative")
    s = spec.scale
    if s == 0.0:
        return np.zeros(n)
    if spec.is_uniform:
        lo, hi = spec.components
        return s * rng.uniform(lo, hi, size=n)
    weights = np.array([w for w, _, _ in spec.components])
    idx = rng.choice(len(weights), size=n, p=weights / weights.sum())
    means = np.array([m for _, m, _ in spec.components])[idx]
    stds = np.array([sd for _, _, sd in spec.components])[idx]
    return s * (means + stds * rng.standard_normal(n))


def pdf(spec: NoiseSpec, eps):
    """Exact density of the scaled distribution at eps (vectorized)."""
    eps = np.asarray(eps, dtype=np.float64)
    s = spec.scale
    if s == 0.0:
        raise ValueError("density undefined at zero noise scale")
    z = eps / s
    if spec.is_uniform:
        lo, hi = spec.components
        inside = (z >= lo) & (z <= hi)
        return inside / (hi - lo) / s
    out = np.zeros_like(z)
    for w, m, sd in spec.components:
        out += w * np.exp(-0.5 * ((z - m) / sd) ** 2) / (sd * SQRT_2PI)
    return out / s


def mean(spec: NoiseSpec):
    """Analytic mean of the scaled distribution."""
    if spec.is_uniform:
        lo, hi = spec.components
        base = (lo + hi) / 2.0
    else:
        base = sum(w * m for w, m, _ in spec.components)
    return spec.scale * base


def std(spec: NoiseSpec):
    """Analytic standard deviation of the scaled distribution."""
    if spec.is_uniform:
        lo, hi = spec.components
        var = (hi - lo) ** 2 / 12.0
    else:
        mu = sum(w * m for w, m, _ in spec.components)
        var = sum(w * (sd * sd + (m - mu) ** 2) for w, m, sd in spec.components)
    return spec.scale * np.sqrt(var)
