import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_ok.kernel import check_second_moment, make_kernel, rho_scaled, sphere_area


@pytest.mark.parametrize(
    "alpha, dim, expected",
    [(0.0, 1, 3.0), (0.0, 2, 8.0 / math.pi), (2.0, 2, 4.0 / math.pi)],
)
def test_power_constant_closed_form(alpha, dim, expected):
    assert make_kernel("power", 0.5, dim, alpha).c_norm == pytest.approx(expected, rel=1e-15)


def test_profile_values():
    assert rho_scaled(make_kernel("power", 0.3, 1, 0.0), 0.5) == pytest.approx(3.0)
    assert rho_scaled(make_kernel("power", 0.3, 2, 2.0), 1.0) == pytest.approx(4.0 / math.pi)


def test_profile_left_continuous_at_horizon():
    for k in (make_kernel("power", 1.0, 2, 1.5), make_kernel("gaussian", 1.0, 2)):
        assert rho_scaled(k, 1.0 - 1e-12) == pytest.approx(rho_scaled(k, 1.0), rel=1e-10)


@pytest.mark.parametrize(
    "family, alpha, dim, tol",
    [("power", 0.0, 1, 1e-14), ("power", 3.5, 2, 1e-12), ("gaussian", 0.0, 2, 1e-10)],
)
def test_second_moment_residual(family, alpha, dim, tol):
    assert check_second_moment(make_kernel(family, 0.5, dim, alpha)) < tol


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_power_constant_matches_independent_quadrature(dim):
    # oracle: c = target / int_0^1 r^(d+1-alpha) dr by high-precision quadrature
    mpmath.mp.dps = 30
    for alpha in (0.0, 0.5, 1.5, 2.5):
        moment = float(mpmath.quad(lambda r: r ** (dim + 1 - alpha), [0, 1]))
        expected = 2 * dim / sphere_area(dim) / moment
        assert make_kernel("power", 1.0, dim, alpha).c_norm == pytest.approx(expected, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    dim=st.sampled_from([1, 2, 3]),
    alpha_frac=st.floats(0.0, 0.95),
    delta=st.floats(0.01, 3.0),
    family=st.sampled_from(["power", "gaussian"]),
)
def test_every_kernel_normalized(dim, alpha_frac, delta, family):
    k = make_kernel(family, delta, dim, alpha_frac * (dim + 2))
    assert k.c_norm > 0
    assert check_second_moment(k) < 1e-10


@settings(max_examples=30, deadline=None)
@given(dim=st.sampled_from([1, 2, 3]), alpha_frac=st.floats(0.0, 0.99))
def test_power_profile_nonincreasing(dim, alpha_frac):
    k = make_kernel("power", 1.0, dim, alpha_frac * (dim + 2))
    r = np.linspace(1e-3, 1.0, 200)
    assert np.all(np.diff(rho_scaled(k, r)) <= 0)


def test_rejections():
    with pytest.raises(ValueError):
        make_kernel("power", 0.5, 2, 4.0)
    with pytest.raises(ValueError):
        make_kernel("power", 0.0, 2, 0.0)
    with pytest.raises(ValueError):
        make_kernel("power", -1.0, 1, 0.0)
    with pytest.raises(ValueError):
        make_kernel("cauchy", 0.5, 1)


def test_rescaled_keeps_profile():
    k = make_kernel("power", 0.5, 2, 1.5)
    k2 = k.rescaled(0.25)
    assert (k2.delta, k2.alpha, k2.c_norm) == (0.25, 1.5, k.c_norm)
