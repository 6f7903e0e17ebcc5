import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_ok.model import (
    ModelParams,
    _quadratic_forms,
    curvature_bound,
    energy_modified,
    energy_parts,
    energy_pnok,
    potential_W,
    potential_Wp,
    potential_Wpp,
    rhs,
    stability_constant,
)
from nonlocal_ok.spectral import GridSpec, dft, inner_h
from nonlocal_ok.symbols import local_table


def test_potential_values():
    assert potential_W(np.array([0.0, 1.0, 0.5])).tolist() == pytest.approx([0.0, 0.0, 1.125])
    assert potential_Wp(np.array([0.0, 1.0])).tolist() == [0.0, 0.0]
    assert curvature_bound() == 198.0


def test_curvature_bound_by_scan():
    u = np.linspace(-10, 10, 200001)
    assert np.max(np.abs(potential_Wpp(u))) <= 198.0 + 1e-9
    inside = np.linspace(-0.5, 1.5, 20001)
    assert np.max(np.abs(36 * (6 * inside**2 - 6 * inside + 1))) == pytest.approx(198.0)


@pytest.mark.parametrize("c", [-0.5, 1.5])
def test_extension_is_c2(c):
    e = 1e-7
    lo, hi = np.array([c - e]), np.array([c + e])
    for f in (potential_W, potential_Wp, potential_Wpp):
        assert abs(f(hi)[0] - f(lo)[0]) < 1e-4
    # one-sided derivative quotients agree across the junction
    h = 1e-5
    for f, fp in ((potential_W, potential_Wp), (potential_Wp, potential_Wpp)):
        left = (f(np.array([c])) - f(np.array([c - h])))[0] / h
        right = (f(np.array([c + h])) - f(np.array([c])))[0] / h
        assert left == pytest.approx(fp(np.array([c]))[0], abs=1e-2)
        assert right == pytest.approx(fp(np.array([c]))[0], abs=1e-2)


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50))
def test_derivative_consistency(u):
    h = 1e-6
    a = np.array([u - h, u + h])
    fd = (potential_W(a)[1] - potential_W(a)[0]) / (2 * h)
    assert fd == pytest.approx(potential_Wp(np.array([u]))[0], rel=1e-6, abs=1e-4)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(epsilon=0.0)
    with pytest.raises(ValueError):
        ModelParams(epsilon=0.1, omega=1.2)
    with pytest.raises(ValueError):
        ModelParams(epsilon=0.1, a_h=-1)
    with pytest.raises(ValueError):
        ModelParams(epsilon=0.1, penalty_scheme="semi")
    assert ModelParams(epsilon=0.1, potential="none").l_wpp == 0.0


def test_rhs_on_constant_state(table2d, grid2d):
    g = grid2d
    p = ModelParams(epsilon=0.2, gamma=0.0, omega=0.3, m_penalty=2.0)
    c = 0.05
    u = np.full(g.shape, p.omega + c)
    expected = -potential_Wp(np.array([p.omega + c]))[0] / p.epsilon - p.m_penalty * c * g.volume
    assert np.allclose(rhs(u, table2d, p), expected, rtol=1e-12)
    p0 = p.with_(potential="none")
    assert np.allclose(rhs(np.full(g.shape, p.omega), table2d, p0), 0.0, atol=1e-12)


def test_rhs_single_mode(table2d, grid2d):
    g = grid2d
    x, _ = g.coords()
    p = ModelParams(epsilon=0.2, gamma=30.0, omega=0.3, m_penalty=50.0)
    a = 0.1
    u = p.omega + a * np.cos(x)
    lam = table2d[1]
    wp_coef = dft(potential_Wp(u, p), g).coeff(1, 0)
    expected = -(p.epsilon * lam + p.gamma / lam) * a / 2 - wp_coef / p.epsilon
    assert dft(rhs(u, table2d, p), g).coeff(1, 0) == pytest.approx(expected, abs=1e-12)


def test_energy_constant_state(table2d, grid2d):
    p = ModelParams(epsilon=0.2, gamma=5.0, omega=0.3, m_penalty=10.0)
    u = np.full(grid2d.shape, p.omega)
    w = potential_W(np.array([p.omega]))[0]
    assert energy_pnok(u, table2d, p) == pytest.approx(w * grid2d.volume / p.epsilon, rel=1e-12)


def test_energy_single_mode_local_1d():
    g = GridSpec(1, 32)
    t = local_table(g)
    p = ModelParams(epsilon=0.3, gamma=2.0, omega=0.2, m_penalty=7.0, potential="none")
    a = 1e-3
    u = p.omega + a * np.cos(g.axis())
    expected = (p.epsilon / 2 + p.gamma / 2) * (a * a / 2) * 2 * math.pi
    assert energy_pnok(u, t, p) == pytest.approx(expected, rel=1e-12)


def test_energy_terms_nonnegative(table2d, grid2d, rng):
    p = ModelParams(epsilon=0.2, gamma=5.0, omega=0.3, m_penalty=10.0)
    parts = energy_parts(rng.standard_normal(grid2d.shape), table2d, p)
    assert parts["interface"] >= 0 and parts["long_range"] >= 0
    assert all(math.isfinite(v) for v in parts.values())


def test_energy_translation_invariant(table2d, grid2d, rng):
    p = ModelParams(epsilon=0.2, gamma=5.0, omega=0.3, m_penalty=10.0)
    u = rng.random(grid2d.shape)
    e0 = energy_pnok(u, table2d, p)
    assert energy_pnok(np.roll(u, (3, -5), axis=(0, 1)), table2d, p) == pytest.approx(e0, rel=1e-12)


def test_stability_constant_examples(table2d):
    p = ModelParams(epsilon=0.1, gamma=0.0, m_penalty=0.0)
    assert stability_constant(table2d, p) == pytest.approx(990.0)
    p = ModelParams(epsilon=0.1, gamma=0.0, m_penalty=1000.0)
    assert stability_constant(table2d, p) - 990.0 == pytest.approx(500 * (2 * math.pi) ** 2)


def test_modified_energy(table2d, grid2d, rng):
    g = grid2d
    p = ModelParams(epsilon=0.2, gamma=4.0, omega=0.3, m_penalty=10.0, a_h=3.0, b_h=2.0, tau=1e-2)
    u = rng.random(g.shape)
    assert energy_modified(u, u, table2d, p) == pytest.approx(energy_pnok(u, table2d, p), rel=1e-14)
    spike = np.zeros(g.shape)
    spike[4, 7] = 0.3
    c_h = stability_constant(table2d, p)
    _, q_inv = _quadratic_forms(spike, table2d)
    expected = (p.a_h / 2 + 1 / (4 * p.tau) + c_h) * g.cell * 0.09 + 0.5 * p.gamma * p.b_h * q_inv
    diff = energy_modified(u + spike, u, table2d, p) - energy_pnok(u + spike, table2d, p)
    assert diff == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("dim, n", [(1, 64), (2, 16)])
def test_rhs_is_negative_gradient(dim, n, rng):
    from nonlocal_ok.kernel import make_kernel
    from nonlocal_ok.symbols import build_table

    g = GridSpec(dim, n)
    t = build_table(make_kernel("power", 0.5, dim, 1.0), g)
    p = ModelParams(epsilon=0.3, gamma=20.0, omega=0.3, m_penalty=5.0)
    for _ in range(5):
        u = rng.uniform(-0.2, 1.2, g.shape)
        v = rng.standard_normal(g.shape)
        s = 1e-5
        fd = (energy_pnok(u + s * v, t, p) - energy_pnok(u - s * v, t, p)) / (2 * s)
        assert -inner_h(rhs(u, t, p), v, g) == pytest.approx(fd, rel=1e-6)
