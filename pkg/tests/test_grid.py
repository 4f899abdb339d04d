import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crossdiff import grid as gf
from crossdiff.errors import NonConvergence
from crossdiff.grid import Field, Grid


def cos_field(n, k=1, extent=1.0):
    g = Grid.uniform(n, extent)
    (x,) = g.centers()
    return g.field(np.cos(k * np.pi * x / extent))


def lam_h(h):
    return 4.0 / h**2 * np.sin(np.pi * h / 2) ** 2


# --- construction ---------------------------------------------------------

def test_grid_geometry():
    g = Grid((2.0, 1.0), (8, 4))
    assert g.dim == 2 and g.shape == (8, 4) and g.size == 32
    assert g.h == (0.25, 0.25)
    assert g.measure == pytest.approx(2.0)
    x, y = g.centers()
    assert x[0, 0] == pytest.approx(0.125) and y[0, -1] == pytest.approx(0.875)


@pytest.mark.parametrize("extents,cells", [((1.0,), (1,)), ((1.0, 1.0, 1.0), (4, 4, 4)),
                                           ((-1.0,), (4,)), ((1.0,), (4, 4))])
def test_grid_rejects_bad_shapes(extents, cells):
    with pytest.raises(ValueError):
        Grid(extents, cells)


def test_field_requires_matching_grid():
    a = Grid.uniform(8).constant(1.0)
    b = Grid.uniform(16).constant(1.0)
    with pytest.raises(ValueError):
        a + b
    with pytest.raises(ValueError):
        Field(Grid.uniform(8), np.zeros(9))


def test_field_arithmetic():
    g = Grid.uniform(4)
    f = g.field(np.arange(4.0))
    assert np.array_equal((2 * f + 1 - f / 2).values, 1.5 * np.arange(4.0) + 1)
    assert np.array_equal((-f).values, -np.arange(4.0))
    assert (1 - f).values[3] == -2.0


# --- Laplacian ------------------------------------------------------------

def test_laplacian_kills_constants():
    for g in (Grid.uniform(7), Grid((1.0, 3.0), (5, 6))):
        assert np.max(np.abs(gf.laplacian_neumann(g.constant(3.7)).values)) < 1e-10


@pytest.mark.parametrize("n", [8, 32, 100])
def test_laplacian_cosine_eigenfield_1d(n):
    f = cos_field(n)
    lap = gf.laplacian_neumann(f).values
    assert np.allclose(lap, -lam_h(1.0 / n) * f.values, rtol=0, atol=1e-9 * lam_h(1.0 / n))


def test_laplacian_separable_2d():
    g = Grid((1.0, 2.0), (16, 24))
    x, y = g.centers()
    f = g.field(np.cos(np.pi * x) * np.cos(np.pi * y / 2.0))
    hx, hy = g.h
    lam = 4 / hx**2 * np.sin(np.pi * hx / 2) ** 2 + 4 / hy**2 * np.sin(np.pi * hy / 4) ** 2
    assert np.allclose(gf.laplacian_neumann(f).values, -lam * f.values, atol=1e-9 * lam)


def test_sparse_matrix_matches_stencil():
    g = Grid((1.0, 1.5), (6, 5))
    rng = np.random.default_rng(3)
    f = g.field(rng.normal(size=g.shape))
    L = gf.laplacian_matrix(g)
    assert np.allclose(L @ f.values.ravel(), gf.laplacian_neumann(f).values.ravel(), atol=1e-10)
    assert gf.laplacian_matrix(g) is L  # cached


field_values = arrays(np.float64, st.integers(2, 40),
                      elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))


@given(field_values, field_values)
def test_laplacian_symmetric(a, b):
    n = min(len(a), len(b))
    g = Grid.uniform(n)
    f, h = g.field(a[:n]), g.field(b[:n])
    lhs = gf.inner(gf.laplacian_neumann(f), h)
    rhs = gf.inner(f, gf.laplacian_neumann(h))
    scale = gf.l2_norm(gf.laplacian_neumann(f)) * gf.l2_norm(h) + gf.l2_norm(f) * gf.l2_norm(
        gf.laplacian_neumann(h)) + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(field_values)
def test_laplacian_nsd_and_conservative(a):
    g = Grid.uniform(len(a))
    f = g.field(a)
    lap = gf.laplacian_neumann(f)
    scale = gf.l2_norm(lap) * gf.l2_norm(f)
    assert gf.inner(lap, f) <= 1e-12 * scale
    assert abs(gf.integrate(lap)) <= 1e-12 * max(gf.l1_norm(lap), 1e-300)


def test_laplacian_zero_form_only_for_constants():
    g = Grid.uniform(10)
    f = g.field(np.r_[np.ones(9), 1.001])
    assert gf.inner(gf.laplacian_neumann(f), f) < 0


# --- quadrature and norms -------------------------------------------------

def test_norms_of_constants():
    g = Grid.uniform(13)
    f = g.constant(-2.5)
    assert gf.integrate(f) == pytest.approx(-2.5)
    assert gf.l2_norm(f) == pytest.approx(2.5)
    assert gf.linf(f) == 2.5
    assert gf.lp_norm(f, 4) == pytest.approx(2.5)


def test_l2_of_cosine():
    assert abs(gf.l2_norm(cos_field(256)) - 1 / np.sqrt(2)) < 1e-4


@given(field_values)
def test_integral_bounded_by_l1(a):
    f = Grid.uniform(len(a)).field(a)
    assert abs(gf.integrate(f)) <= gf.l1_norm(f) * (1 + 1e-12)


def test_lp_norm_rejects_p_below_one():
    with pytest.raises(ValueError):
        gf.lp_norm(Grid.uniform(4).constant(1.0), 0.5)


def test_gradient_norm_of_linear_profile():
    g = Grid.uniform(20, 2.0)
    (x,) = g.centers()
    # slope 3 on interior faces: 19 faces of width h = 0.1
    assert gf.grad_l2_squared(g.field(3 * x)) == pytest.approx(9 * 19 * 0.1)


# --- Neumann Poisson and the dual norm -----------------------------------

def test_poisson_constant_rhs():
    phi = gf.neumann_poisson(Grid.uniform(16).constant(4.0))
    assert np.all(phi.values == 0.0)


def test_poisson_cosine_eigenfield():
    n = 64
    w = cos_field(n)
    phi = gf.neumann_poisson(w, tol=1e-13)
    assert np.allclose(phi.values, w.values / lam_h(1.0 / n), atol=1e-12)
    assert abs(gf.integrate(phi)) < 1e-14


@pytest.mark.parametrize("shape", [(30,), (12, 9)])
def test_poisson_residual_contract(shape):
    g = Grid(tuple(1.0 + 0.5 * k for k in range(len(shape))), shape)
    rng = np.random.default_rng(11)
    w = g.field(rng.normal(size=shape))
    tol = 1e-10
    phi = gf.neumann_poisson(w, tol=tol)
    fluct = w - gf.mean(w)
    res = gf.laplacian_neumann(phi) + fluct
    assert np.linalg.norm(res.values) <= tol * np.linalg.norm(fluct.values) * (1 + 1e-9)
    assert abs(gf.mean(phi)) < 1e-13


def test_poisson_maxiter_raises():
    rng = np.random.default_rng(0)
    w = Grid.uniform(200).field(rng.normal(size=200))
    with pytest.raises(NonConvergence):
        gf.neumann_poisson(w, tol=1e-14, maxiter=3)


@pytest.mark.parametrize("c", [0.0, 1.0, -3.25, 1e6, 0.1])
def test_dual_norm_of_constants_exact(c):
    for g in (Grid.uniform(37), Grid((1.0, 2.0), (9, 10))):
        w = g.constant(c)
        assert abs(gf.h1_dual_norm(w) - abs(c)) <= 1e-12 * max(1.0, abs(c))


def test_dual_norm_of_cosine():
    n = 256
    expected = np.sqrt(0.5 / lam_h(1.0 / n))  # discrete value, tends to 1/(sqrt(2) pi)
    val = gf.h1_dual_norm(cos_field(n), tol=1e-12)
    assert val == pytest.approx(expected, rel=1e-8)
    assert abs(val - 1 / (np.sqrt(2) * np.pi)) < 1e-5


def test_dual_norm_mean_plus_cosine():
    val = gf.h1_dual_norm(cos_field(256) + 3.0, tol=1e-12)
    assert abs(val - np.sqrt(9 + 1 / (2 * np.pi**2))) < 1e-5
    assert val == pytest.approx(3.008432, abs=5e-6)


def test_dual_norm_bounded_by_l2_under_refinement():
    rng = np.random.default_rng(5)
    ratios = []
    for n in (16, 32, 64, 128):
        w = Grid.uniform(n).field(rng.normal(size=n))
        ratios.append(gf.h1_dual_norm(w) / gf.l2_norm(w))
    # Poincare: ||w||_{(H^1)'} <= max(1, 1/pi) ||w||_2 on the unit interval
    assert max(ratios) <= 1.0 + 1e-12


# --- restriction and snapshots --------------------------------------------

def test_restrict_averages_cells():
    fine = Grid.uniform(8)
    f = fine.field(np.arange(8.0))
    c = gf.restrict(f, fine.coarsened())
    assert np.array_equal(c.values, np.array([0.5, 2.5, 4.5, 6.5]))
    assert gf.integrate(c) == pytest.approx(gf.integrate(f))
    with pytest.raises(ValueError):
        gf.restrict(f, Grid.uniform(3))


@pytest.mark.parametrize("shape", [(7,), (3, 5)])
def test_snapshot_round_trip_bit_exact(tmp_path, shape):
    g = Grid(tuple(0.3 + k for k in range(len(shape))), shape)
    rng = np.random.default_rng(1)
    f = g.field(rng.normal(size=shape) * 10.0 ** rng.integers(-20, 20, size=shape))
    p = tmp_path / "f.snap"
    gf.write_snapshot(p, f, t=0.1 + 0.2)
    back, t = gf.read_snapshot(p)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    assert t == 0.1 + 0.2


def test_snapshot_header_is_plain_text(tmp_path):
    p = tmp_path / "f.snap"
    gf.write_snapshot(p, Grid.uniform(2).constant(1.5))
    assert p.read_text().splitlines() == ["dim 1", "cells 2", "extents 1.0", "values", "1.5", "1.5"]
