import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nonlocal_ok.spectral import (
    GridMismatch,
    GridSpec,
    apply_L,
    apply_L_inv,
    dft,
    idft,
    inner_h,
    l2h,
    linfh,
    read_grid,
    write_grid,
)
from nonlocal_ok.symbols import local_table

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_grid_nodes():
    g = GridSpec(1, 8)
    ax = g.axis()
    assert ax[0] == pytest.approx(-math.pi + g.h)
    assert ax[-1] == pytest.approx(math.pi)


def test_constant_coefficients():
    g = GridSpec(2, 8)
    F = dft(np.full(g.shape, 2.5), g)
    assert F.coeff(0, 0) == pytest.approx(2.5)
    assert np.allclose(np.delete(F.coeffs.ravel(), 0), 0.0, atol=1e-14)


def test_cosine_coefficients():
    g = GridSpec(1, 16)
    F = dft(np.cos(g.axis()), g)
    assert F.coeff(1) == pytest.approx(0.5, abs=1e-14)
    assert F.coeff(-1) == pytest.approx(0.5, abs=1e-14)
    # sin picks up the i/2 phase convention of the nodes, not of the indices
    S = dft(np.sin(g.axis()), g)
    assert S.coeff(1) == pytest.approx(-0.5j, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (12, 12), elements=finite))
def test_round_trip_and_parseval(f):
    g = GridSpec(2, 12)
    F = dft(f, g)
    assert np.max(np.abs(idft(F, g) - f)) <= 1e-12 * max(1.0, np.max(np.abs(f)))
    lhs = l2h(f, g) ** 2
    rhs = g.volume * float(np.sum(np.abs(F.coeffs) ** 2))
    assert rhs == pytest.approx(lhs, rel=1e-10, abs=1e-10)


def test_apply_L_eigenfunction(table2d, grid2d):
    x, y = grid2d.coords()
    f = np.cos(2 * x + 3 * y)
    assert np.allclose(apply_L(table2d, f), table2d[13] * f, atol=1e-12)
    assert np.allclose(apply_L(table2d, np.ones(grid2d.shape)), 0.0, atol=1e-12)


def test_local_operator_cos2x(grid1d):
    t = local_table(grid1d)
    x = grid1d.axis()
    assert np.allclose(apply_L(t, np.cos(2 * x)), 4 * np.cos(2 * x), atol=1e-12)
    assert np.allclose(apply_L_inv(t, np.cos(x)), np.cos(x), atol=1e-12)
    assert np.allclose(apply_L_inv(t, np.full(grid1d.shape, 3.0)), 0.0, atol=1e-12)


def test_inverse_round_trip(table2d, grid2d, rng):
    f = rng.standard_normal(grid2d.shape)
    f -= f.mean()
    g = apply_L_inv(table2d, f)
    assert abs(g.mean()) < 1e-12
    assert np.max(np.abs(apply_L(table2d, g) - f)) < 1e-9
    # nonzero mean is discarded
    g2 = apply_L_inv(table2d, f + 7.0)
    assert np.allclose(apply_L(table2d, g2), f, atol=1e-9)


def test_norms():
    g = GridSpec(2, 16)
    one = np.ones(g.shape)
    assert l2h(one, g) ** 2 == pytest.approx((2 * math.pi) ** 2)
    assert inner_h(one, 2 * one, g) == pytest.approx(2 * (2 * math.pi) ** 2)
    assert linfh(-3 * one, g) == 3.0


def test_grid_mismatch(table2d):
    with pytest.raises(GridMismatch):
        apply_L(table2d, np.zeros((8, 8)))
    with pytest.raises(GridMismatch):
        inner_h(np.zeros(4), np.zeros(5), GridSpec(1, 4))


def test_nokgrid_round_trip(tmp_path, rng):
    g = GridSpec(2, 8)
    f = rng.standard_normal(g.shape)
    p = tmp_path / "f.nokgrid"
    write_grid(p, f, g)
    assert p.read_bytes().startswith(b"NOKGRID 2 8\n")
    u, g2 = read_grid(p)
    assert g2 == g and np.array_equal(u, f)


def test_nokgrid_rejects_truncated(tmp_path):
    p = tmp_path / "bad.nokgrid"
    p.write_bytes(b"NOKGRID 2 8\n" + b"\0" * 16)
    with pytest.raises(ValueError):
        read_grid(p)
    p.write_bytes(b"GRID 2 8\n")
    with pytest.raises(ValueError):
        read_grid(p)
