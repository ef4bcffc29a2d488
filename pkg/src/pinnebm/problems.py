"""PDE problem definitions: residual operators, true solutions, datasets.

Three problems are supported: the exponential growth ODE, the Bessel
equation of order one, and the 2-D incompressible Navier-Stokes momentum
equations in stream-function form. The first two generate synthetic data
from their analytic solutions; Navier-Stokes ingests an external CSV.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import noise as noise_mod
from .autodiff import Jet, StructuralError
from .special import bessel_j1


class DatasetError(ValueError):
    """Malformed or insufficient external data."""


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    true_lambda: np.ndarray
    input_dim: int
    output_dim: int          # network outputs
    measured_dim: int        # channels with measurements
    domain: tuple            # per-dimension (lo, hi); None for data-defined
    nu: float = 1.0          # Bessel order, fixed
    # starting guess for the trainable PDE parameters; zero is fine when the
    # residual is linear in lambda, but the Bessel operator depends on it
    # only through (lam t)^2, which makes lam = 0 a stationary point
    lambda_init: tuple = (0.0,)

    @property
    def lambda_dim(self):
        return len(self.true_lambda)


def exp_problem():
    return ProblemSpec("exp", np.array([0.3]), 1, 1, 1, ((0.0, 10.0),))


def bessel_problem():
    return ProblemSpec("bessel", np.array([0.7]), 1, 1, 1, ((0.0, 20.0),),
                       lambda_init=(0.5,))


def ns_problem():
    # outputs are stream function and pressure; u, v are measured
    return ProblemSpec("ns", np.array([1.0, 0.01]), 3, 2, 2, None,
                       lambda_init=(0.0, 0.0))


def problem_by_name(name):
    try:
        return {"exp": exp_problem, "bessel": bessel_problem, "ns": ns_problem}[name]()
    except KeyError:
        raise ValueError(f"unknown problem kind {name!r}") from None


# -- true solutions ----------------------------------------------------------

def true_solution_exp(t, lam):
    return np.exp(lam * np.asarray(t, dtype=np.float64))

def true_solution_bessel(t, lam):
    return bessel_j1(lam * np.asarray(t, dtype=np.float64))

def true_solution(problem, t):
    if problem.kind == "exp":
        return true_solution_exp(t, problem.true_lambda[0])
    if problem.kind == "bessel":
        return true_solution_bessel(t, problem.true_lambda[0])
    raise ValueError(f"no analytic solution for problem {problem.kind!r}")


# -- residual operators ------------------------------------------------------

def residual_exp(xjet: Jet, lam):
    """dx/dt - lam * x."""
    if not isinstance(xjet, Jet) or xjet.order < 1:
        raise StructuralError("exponential residual needs a jet of order >= 1")
    return xjet.d1 - lam * xjet.value


def residual_bessel(xjet: Jet, lam, t, nu=1.0):
    """Bessel operator in the time variable: t^2 x'' + t x' + ((lam t)^2 - nu^2) x.

    This is the order-nu Bessel equation in z = lam t rewritten with
    derivatives taken with respect to t, so x(t) = J_nu(lam t) solves it."""
    if not isinstance(xjet, Jet) or xjet.order < 2:
        raise StructuralError("Bessel residual needs a jet of order >= 2")
    u = lam * t
    t2 = t * t
    return t2 * xjet.d2 + t * xjet.d1 + u * u * xjet.value - (nu * nu) * xjet.value


@dataclass
class NSDerivatives:
    """Velocity/pressure derivatives assembled from stream-function jets."""

    u: object
    v: object
    u_t: object
    u_x: object
    u_y: object
    u_xx: object
    u_yy: object
    v_t: object
    v_x: object
    v_y: object
    v_xx: object
    v_yy: object
    p_x: object
    p_y: object


def residual_ns(d: NSDerivatives, lam1, lam2):
    """Both momentum residuals of the 2-D incompressible equations."""
    for name in ("u_t", "u_x", "u_y", "u_xx", "u_yy",
                 "v_t", "v_x", "v_y", "v_xx", "v_yy", "p_x", "p_y"):
        if getattr(d, name) is None:
            raise StructuralError(f"missing derivative {name} in bundle")
    r_u = d.u_t + lam1 * (d.u * d.u_x + d.v * d.u_y) + d.p_x - lam2 * (d.u_xx + d.u_yy)
    r_v = d.v_t + lam1 * (d.u * d.v_x + d.v * d.v_y) + d.p_y - lam2 * (d.v_xx + d.v_yy)
    return r_u, r_v


def _ns_pass(apply_fn, pts, direction, order):
    """One jet forward pass; returns (psi jet comps, p jet comps)."""
    seed = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    jet = Jet([pts, seed] + [0.0] * (order - 1))
    out = apply_fn(jet)
    return out.col(0), out.col(1)


def ns_derivatives(apply_fn, pts) -> NSDerivatives:
    """All derivatives needed by residual_ns, from seven jet passes.

    `apply_fn` maps a (N, 3) jet over inputs (t, x, y) to a (N, 2) jet of
    (stream function, pressure). Mixed derivatives come from polarization
    of directional derivatives, third order included.
    """
    pts = np.asarray(pts, dtype=np.float64)
    e_t, e_x, e_y = (1, 0, 0), (0, 1, 0), (0, 0, 1)
    psi_tj, _ = _ns_pass(apply_fn, pts, e_t, 2)
    psi_xj, p_xj = _ns_pass(apply_fn, pts, e_x, 3)
    psi_yj, p_yj = _ns_pass(apply_fn, pts, e_y, 3)
    psi_xyj, _ = _ns_pass(apply_fn, pts, (0, 1, 1), 3)
    psi_xmyj, _ = _ns_pass(apply_fn, pts, (0, 1, -1), 3)
    psi_txj, _ = _ns_pass(apply_fn, pts, (1, 1, 0), 2)
    psi_tyj, _ = _ns_pass(apply_fn, pts, (1, 0, 1), 2)

    psi_x, psi_xx, psi_xxx = psi_xj.d1, psi_xj.d2, psi_xj.d3
    psi_y, psi_yy, psi_yyy = psi_yj.d1, psi_yj.d2, psi_yj.d3
    psi_tt = psi_tj.d2
    psi_xy = 0.5 * (psi_xyj.d2 - psi_xx - psi_yy)
    psi_tx = 0.5 * (psi_txj.d2 - psi_tt - psi_xx)
    psi_ty = 0.5 * (psi_tyj.d2 - psi_tt - psi_yy)
    # polarization of the symmetric third-order form along x+y and x-y
    psi_xxy = (psi_xyj.d3 - psi_xmyj.d3 - 2.0 * psi_yyy) * (1.0 / 6.0)
    psi_xyy = (psi_xyj.d3 + psi_xmyj.d3 - 2.0 * psi_xxx) * (1.0 / 6.0)

    return NSDerivatives(
        u=psi_y,
        v=-psi_x,
        u_t=psi_ty,
        u_x=psi_xy,
        u_y=psi_yy,
        u_xx=psi_xxy,
        u_yy=psi_yyy,
        v_t=-psi_tx,
        v_x=-psi_xx,
        v_y=-psi_xy,
        v_xx=-psi_xxx,
        v_yy=-psi_xyy,
        p_x=p_xj.d1,
        p_y=p_yj.d1,
    )


# -- model evaluation entry points -------------------------------------------

def predict_measured(problem, mlp, t, leaves=None, mode="eval", rng=None):
    """Predicted measured channels at inputs t, rows stacked channel-major.

    Returns shape (N, 1) for scalar problems and (2N, 1) for Navier-Stokes
    (u rows first, then v rows), matching stack_targets().
    """
    t = np.asarray(t, dtype=np.float64)
    if problem.kind in ("exp", "bessel"):
        return mlp.apply(t, leaves, mode=mode, rng=rng)
    apply_fn = lambda xin: mlp.apply(xin, leaves, mode=mode, rng=rng)
    psi_xj, _ = _ns_pass(apply_fn, t, (0, 1, 0), 1)
    psi_yj, _ = _ns_pass(apply_fn, t, (0, 0, 1), 1)
    u = psi_yj.d1
    v = -psi_xj.d1
    if isinstance(u, ad.Value):
        return ad.concat_rows([u, v])
    return np.concatenate([u, v], axis=0)


def stack_targets(problem, y):
    """Targets matching predict_measured's row stacking."""
    y = np.asarray(y, dtype=np.float64)
    if problem.kind in ("exp", "bessel"):
        return y.reshape(-1, 1)
    return np.concatenate([y[:, 0:1], y[:, 1:2]], axis=0)


def residuals(problem, mlp, t_colloc, lam, leaves=None, mode="eval", rng=None):
    """PDE residual rows at the collocation inputs, stacked channel-major.

    `lam` may be a tape Value (training) or a plain array (evaluation)."""
    t_colloc = np.asarray(t_colloc, dtype=np.float64)
    lam_parts = _lam_elements(lam, problem.lambda_dim)
    apply_fn = lambda xin: mlp.apply(xin, leaves, mode=mode, rng=rng)
    if problem.kind == "exp":
        xjet = apply_fn(Jet([t_colloc, np.ones_like(t_colloc)]))
        return residual_exp(xjet, lam_parts[0])
    if problem.kind == "bessel":
        xjet = apply_fn(Jet([t_colloc, np.ones_like(t_colloc), 0.0]))
        return residual_bessel(xjet, lam_parts[0], t_colloc, nu=problem.nu)
    bundle = ns_derivatives(apply_fn, t_colloc)
    r_u, r_v = residual_ns(bundle, lam_parts[0], lam_parts[1])
    if isinstance(r_u, ad.Value):
        return ad.concat_rows([r_u, r_v])
    return np.concatenate([r_u, r_v], axis=0)


def _lam_elements(lam, k):
    if isinstance(lam, ad.Value):
        col = lam.reshape(-1, 1)
        return [col.col(i) for i in range(k)]
    arr = np.asarray(lam, dtype=np.float64).reshape(-1)
    return [float(arr[i]) for i in range(k)]


# -- datasets -----------------------------------------------------------------

@dataclass
class Dataset:
    t_train: np.ndarray      # (N_d, input_dim)
    y_train: np.ndarray      # (N_d, measured_dim)
    t_val: np.ndarray
    y_val: np.ndarray
    x_val_true: np.ndarray   # noiseless measured channels at t_val
    t_colloc: np.ndarray     # (N_c, input_dim)

    @property
    def n_train(self):
        return self.t_train.shape[0]


def synth_dataset(problem, spec, n_data, n_val, n_colloc, rng) -> Dataset:
    """Synthetic data: random inputs, analytic solution plus sampled noise,
    collocation points on a uniform grid over the domain."""
    if problem.kind == "ns":
        raise DatasetError("Navier-Stokes data must be ingested from file")
    if min(n_data, n_val, n_colloc) < 1:
        raise ValueError("all point counts must be positive")
    (lo, hi), = problem.domain
    t_train = rng.uniform(lo, hi, size=(n_data, 1))
    t_val = rng.uniform(lo, hi, size=(n_val, 1))
    x_train = true_solution(problem, t_train)
    x_val = true_solution(problem, t_val)
    y_train = x_train + noise_mod.sample(spec, n_data, rng).reshape(-1, 1)
    y_val = x_val + noise_mod.sample(spec, n_val, rng).reshape(-1, 1)
    t_colloc = np.linspace(lo, hi, n_colloc).reshape(-1, 1)
    return Dataset(t_train, y_train, t_val, y_val, x_val, t_colloc)


NS_COLUMNS = ("t", "x", "y", "u", "v", "p")


def read_ns_csv(path):
    """Parse the documented CSV format: header `t,x,y,u,v,p`, `#` comments."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = tuple(c.strip() for c in line.split(","))
                if header != NS_COLUMNS:
                    raise DatasetError(
                        f"line {lineno}: expected header {','.join(NS_COLUMNS)}"
                    )
                continue
            parts = line.split(",")
            if len(parts) != len(NS_COLUMNS):
                raise DatasetError(f"line {lineno}: expected 6 fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise DatasetError(f"line {lineno}: {exc}") from None
    if header is None:
        raise DatasetError("file has no header line")
    return np.asarray(rows, dtype=np.float64)


def load_external_dataset(path, spec, n_data, n_val, n_colloc, rng) -> Dataset:
    """Subsample an external observation table and add noise to u and v."""
    table = read_ns_csv(path)
    n_rows = table.shape[0]
    if n_rows < n_data + n_val:
        raise DatasetError(
            f"need {n_data + n_val} rows for train+validation, file has {n_rows}"
        )
    perm = rng.permutation(n_rows)
    idx_train = perm[:n_data]
    idx_val = perm[n_data : n_data + n_val]
    idx_colloc = (
        rng.choice(n_rows, size=n_colloc, replace=False)
        if n_colloc <= n_rows
        else rng.choice(n_rows, size=n_colloc, replace=True)
    )
    t_train = table[idx_train, :3]
    uv_train = table[idx_train, 3:5]
    t_val = table[idx_val, :3]
    uv_val = table[idx_val, 3:5]
    eps_train = noise_mod.sample(spec, 2 * n_data, rng).reshape(n_data, 2)
    eps_val = noise_mod.sample(spec, 2 * n_val, rng).reshape(n_val, 2)
    return Dataset(
        t_train,
        uv_train + eps_train,
        t_val,
        uv_val + eps_val,
        uv_val,
        table[idx_colloc, :3],
    )
