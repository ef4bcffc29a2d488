"""Bessel-function evaluation against mpmath and the standard recurrences."""

import mpmath
import numpy as np
import pytest

from pinnebm.special import bessel_j0, bessel_j1, bessel_j1_derivatives


@pytest.mark.parametrize("fn,n", [(bessel_j0, 0), (bessel_j1, 1)])
def test_matches_mpmath_over_working_range(fn, n):
    z = np.linspace(0.0, 40.0, 801)
    want = np.array([float(mpmath.besselj(n, float(t))) for t in z])
    got = fn(z)
    assert np.max(np.abs(got - want)) < 1e-10


def test_accuracy_near_branch_crossover():
    z = np.linspace(13.0, 15.0, 401)
    want = np.array([float(mpmath.besselj(1, float(t))) for t in z])
    assert np.max(np.abs(bessel_j1(z) - want)) < 1e-10


def test_known_values_at_zero():
    assert bessel_j0(0.0) == pytest.approx(1.0)
    assert bessel_j1(0.0) == pytest.approx(0.0)


def test_three_term_recurrence():
    # J0(z) + J2(z) = (2/z) J1(z), with J2 from the derivative helper's algebra
    z = np.linspace(0.5, 30.0, 200)
    j0 = bessel_j0(z)
    j1 = bessel_j1(z)
    j2 = np.array([float(mpmath.besselj(2, float(t))) for t in z])
    np.testing.assert_allclose(j0 + j2, 2.0 * j1 / z, rtol=1e-9, atol=1e-10)


def test_first_derivative_matches_mpmath():
    z = np.linspace(0.0, 25.0, 301)
    _, d1, _ = bessel_j1_derivatives(z)
    want = np.array([float(mpmath.besselj(1, float(t), derivative=1)) for t in z])
    assert np.max(np.abs(d1 - want)) < 1e-9


def test_second_derivative_matches_mpmath():
    z = np.linspace(0.1, 25.0, 300)
    _, _, d2 = bessel_j1_derivatives(z)
    want = np.array([float(mpmath.besselj(1, float(t), derivative=2)) for t in z])
    assert np.max(np.abs(d2 - want)) < 1e-8


def test_derivative_limits_at_zero():
    j1, d1, d2 = bessel_j1_derivatives(0.0)
    assert j1 == pytest.approx(0.0)
    assert d1 == pytest.approx(0.5)
    assert d2 == pytest.approx(0.0)


def test_solution_satisfies_bessel_equation():
    # z^2 J1'' + z J1' + (z^2 - 1) J1 = 0
    z = np.linspace(0.2, 20.0, 150)
    j1, d1, d2 = bessel_j1_derivatives(z)
    res = z**2 * d2 + z * d1 + (z**2 - 1.0) * j1
    assert np.max(np.abs(res)) < 1e-8


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        bessel_j1(-1.0)
