"""Residual operators against analytic and manufactured solutions,
dataset construction, and external-table ingestion."""

import numpy as np
import pytest

from pinnebm import autodiff as ad
from pinnebm import noise as noise_mod
from pinnebm import problems as prob
from pinnebm.autodiff import Jet, StructuralError
from pinnebm.network import init_mlp, mlp_config
from pinnebm.special import bessel_j1_derivatives


# -- residual oracles ---------------------------------------------------------

def test_exp_residual_vanishes_on_true_solution():
    lam = 0.3
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 10, size=(100, 1))
    xjet = ad.exp(lam * Jet([t, np.ones_like(t)]))
    res = prob.residual_exp(xjet, lam)
    assert np.max(np.abs(res)) < 1e-8


def test_exp_residual_nonzero_for_wrong_parameter():
    t = np.linspace(0.1, 5, 20).reshape(-1, 1)
    xjet = ad.exp(0.3 * Jet([t, np.ones_like(t)]))
    res = prob.residual_exp(xjet, 0.5)
    assert np.min(np.abs(res)) > 1e-3


def test_bessel_residual_vanishes_on_true_solution():
    lam = 0.7
    rng = np.random.default_rng(1)
    t = rng.uniform(0.1, 20, size=(100, 1))
    j1, d1, d2 = bessel_j1_derivatives(lam * t)
    # chain rule: x(t) = J1(lam t)
    xjet = Jet([j1, lam * d1, lam * lam * d2])
    res = prob.residual_bessel(xjet, lam, t, nu=1.0)
    assert np.max(np.abs(res)) < 1e-8


def test_residual_order_requirements():
    t = np.ones((3, 1))
    with pytest.raises(StructuralError):
        prob.residual_exp(np.ones((3, 1)), 0.3)  # not a jet
    with pytest.raises(StructuralError):
        prob.residual_bessel(Jet([t, t]), 0.7, t)  # order 1 < 2


# -- Navier-Stokes: Taylor-Green manufactured solution ------------------------

NU = 0.05


def _stack_jets(ja, jb, n):
    """Two scalar (N,1) jets as one (N,2) jet, columnwise."""
    comps = []
    for k in range(ja.order + 1):
        a = ja.value if k == 0 else ja.d(k)
        b = jb.value if k == 0 else jb.d(k)
        comps.append(np.hstack([
            np.broadcast_to(np.asarray(a, dtype=np.float64), (n, 1)),
            np.broadcast_to(np.asarray(b, dtype=np.float64), (n, 1)),
        ]))
    return Jet(comps, ja.direction_id)


def taylor_green_apply(jet):
    """(psi, p) of the decaying vortex: psi = cos x cos y e^(-2 nu t),
    p = -1/4 (cos 2x + cos 2y) e^(-4 nu t)."""
    t, x, y = jet.col(0), jet.col(1), jet.col(2)
    decay = ad.exp(-2.0 * NU * t)
    psi = ad.cos(x) * ad.cos(y) * decay
    p = -0.25 * (ad.cos(2.0 * x) + ad.cos(2.0 * y)) * ad.exp(-4.0 * NU * t)
    n = np.asarray(jet.value).shape[0]
    return _stack_jets(psi, p, n)


def test_ns_residual_vanishes_on_taylor_green():
    rng = np.random.default_rng(2)
    pts = rng.uniform([0.0, -np.pi, -np.pi], [2.0, np.pi, np.pi], size=(100, 3))
    bundle = prob.ns_derivatives(taylor_green_apply, pts)
    r_u, r_v = prob.residual_ns(bundle, 1.0, NU)
    assert np.max(np.abs(r_u)) < 1e-8
    assert np.max(np.abs(r_v)) < 1e-8


def test_ns_residual_nonzero_for_wrong_viscosity():
    pts = np.array([[0.5, 0.3, 0.8], [1.0, -1.0, 0.2]])
    bundle = prob.ns_derivatives(taylor_green_apply, pts)
    r_u, _ = prob.residual_ns(bundle, 1.0, 10.0 * NU)
    assert np.max(np.abs(r_u)) > 1e-3


def test_ns_residual_requires_all_derivatives():
    pts = np.array([[0.5, 0.3, 0.8]])
    bundle = prob.ns_derivatives(taylor_green_apply, pts)
    bundle.u_xx = None
    with pytest.raises(StructuralError):
        prob.residual_ns(bundle, 1.0, NU)


def test_ns_derivatives_of_network_match_finite_differences():
    mlp = init_mlp(mlp_config(3, 2, 8, 2), np.random.default_rng(3))

    def psi_np(pts):
        return mlp.apply(pts)[:, 0:1]

    pts = np.random.default_rng(4).uniform(-0.5, 0.5, size=(5, 3))
    bundle = prob.ns_derivatives(lambda j: mlp.apply(j), pts)

    h = 1e-3
    ex = np.array([[0.0, h, 0.0]])
    ey = np.array([[0.0, 0.0, h]])
    u_fd = (psi_np(pts + ey) - psi_np(pts - ey)) / (2 * h)
    np.testing.assert_allclose(bundle.u, u_fd, atol=1e-7)
    uxy_fd = (
        psi_np(pts + ex + ey) - psi_np(pts + ex - ey)
        - psi_np(pts - ex + ey) + psi_np(pts - ex - ey)
    ) / (4 * h * h)
    np.testing.assert_allclose(bundle.u_x, uxy_fd, atol=1e-6)

    h3 = 1e-2
    ex3, ey3 = ex / h * h3, ey / h * h3

    def psi_y(pts):
        return (psi_np(pts + ey3) - psi_np(pts - ey3)) / (2 * h3)

    uxx_fd = (psi_y(pts + ex3) - 2 * psi_y(pts) + psi_y(pts - ex3)) / h3**2
    np.testing.assert_allclose(bundle.u_xx, uxx_fd, atol=1e-4)


# -- model evaluation stacking -------------------------------------------------

def test_predict_measured_matches_stack_targets_layout():
    ns = prob.ns_problem()
    mlp = init_mlp(mlp_config(3, 2, 6, 2), np.random.default_rng(5))
    pts = np.random.default_rng(6).uniform(-1, 1, size=(4, 3))
    pred = prob.predict_measured(ns, mlp, pts)
    assert pred.shape == (8, 1)  # u rows then v rows
    y = np.arange(8.0).reshape(4, 2)
    stacked = prob.stack_targets(ns, y)
    np.testing.assert_array_equal(stacked[:4, 0], y[:, 0])
    np.testing.assert_array_equal(stacked[4:, 0], y[:, 1])


def test_predict_measured_velocities_come_from_stream_function():
    ns = prob.ns_problem()
    mlp = init_mlp(mlp_config(3, 2, 6, 2), np.random.default_rng(7))
    pts = np.random.default_rng(8).uniform(-0.5, 0.5, size=(3, 3))
    pred = prob.predict_measured(ns, mlp, pts)
    bundle = prob.ns_derivatives(lambda j: mlp.apply(j), pts)
    np.testing.assert_allclose(pred[:3], bundle.u, rtol=1e-12)
    np.testing.assert_allclose(pred[3:], bundle.v, rtol=1e-12)


# -- datasets -------------------------------------------------------------------

def test_synth_dataset_shapes_and_noise():
    p = prob.exp_problem()
    spec = noise_mod.make_noise("3G")
    ds = prob.synth_dataset(p, spec, 50, 30, 100, np.random.default_rng(0))
    assert ds.t_train.shape == (50, 1) and ds.y_train.shape == (50, 1)
    assert ds.t_val.shape == (30, 1) and ds.x_val_true.shape == (30, 1)
    assert ds.t_colloc.shape == (100, 1)
    np.testing.assert_allclose(ds.t_colloc[:, 0], np.linspace(0, 10, 100))
    clean = prob.true_solution(p, ds.t_train)
    assert np.all(ds.y_train != clean)  # noise actually applied
    np.testing.assert_allclose(ds.x_val_true, prob.true_solution(p, ds.t_val))


def test_synth_dataset_zero_noise_is_clean():
    p = prob.exp_problem()
    spec = noise_mod.make_noise("3G", strength=0.0)
    ds = prob.synth_dataset(p, spec, 20, 10, 50, np.random.default_rng(1))
    np.testing.assert_allclose(ds.y_train, prob.true_solution(p, ds.t_train))


def test_synth_dataset_rejects_ns():
    with pytest.raises(prob.DatasetError):
        prob.synth_dataset(prob.ns_problem(), noise_mod.make_noise("3G"),
                           10, 10, 10, np.random.default_rng(0))


NS_FIXTURE = """\
# ten observation rows
t,x,y,u,v,p
0.0,1.0,0.0,0.9,0.1,0.05
0.0,1.5,0.5,0.8,0.2,0.04
0.1,1.0,0.0,0.88,0.11,0.05
0.1,1.5,0.5,0.79,0.21,0.04
0.2,2.0,-0.5,0.7,0.3,0.03
0.2,2.5,0.0,0.6,0.4,0.02
0.3,3.0,0.5,0.5,0.5,0.01
0.3,3.5,-0.5,0.4,0.6,0.01
0.4,4.0,0.0,0.3,0.7,0.0
0.4,4.5,0.5,0.2,0.8,0.0
"""


def _write_fixture(tmp_path, text=NS_FIXTURE):
    path = tmp_path / "wake.csv"
    path.write_text(text)
    return path


def test_read_ns_csv_roundtrip(tmp_path):
    table = prob.read_ns_csv(_write_fixture(tmp_path))
    assert table.shape == (10, 6)
    assert table[0, 3] == pytest.approx(0.9)
    assert table[-1, 5] == pytest.approx(0.0)


def test_read_ns_csv_bad_header_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# c\nt,x,y,u,v\n0,0,0,0,0\n")
    with pytest.raises(prob.DatasetError, match="line 2"):
        prob.read_ns_csv(path)


def test_read_ns_csv_bad_field_count_and_value(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x,y,u,v,p\n1,2,3\n")
    with pytest.raises(prob.DatasetError, match="line 2"):
        prob.read_ns_csv(path)
    path.write_text("t,x,y,u,v,p\n1,2,3,4,5,abc\n")
    with pytest.raises(prob.DatasetError, match="line 2"):
        prob.read_ns_csv(path)


def test_read_ns_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# only comments\n")
    with pytest.raises(prob.DatasetError, match="header"):
        prob.read_ns_csv(path)


def test_load_external_dataset_disjoint_and_noisy(tmp_path):
    path = _write_fixture(tmp_path)
    spec = noise_mod.make_noise("3G", base_scale=0.05)
    ds = prob.load_external_dataset(path, spec, 4, 3, 5, np.random.default_rng(0))
    assert ds.t_train.shape == (4, 3) and ds.y_train.shape == (4, 2)
    assert ds.t_val.shape == (3, 3) and ds.t_colloc.shape == (5, 3)
    # train and validation subsamples never share a row
    train_rows = {tuple(r) for r in ds.t_train}
    val_rows = {tuple(r) for r in ds.t_val}
    assert not train_rows & val_rows
    # ground truth is the clean table, measurements are perturbed
    assert np.all(ds.y_val != ds.x_val_true)


def test_load_external_dataset_needs_enough_rows(tmp_path):
    path = _write_fixture(tmp_path)
    with pytest.raises(prob.DatasetError):
        prob.load_external_dataset(path, noise_mod.make_noise("3G"),
                                   8, 8, 5, np.random.default_rng(0))


def test_problem_by_name():
    assert prob.problem_by_name("exp").kind == "exp"
    assert prob.problem_by_name("bessel").true_lambda[0] == pytest.approx(0.7)
    assert prob.problem_by_name("ns").lambda_dim == 2
    with pytest.raises(ValueError):
        prob.problem_by_name("heat")
