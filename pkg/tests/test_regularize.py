import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crossdiff import grid as gf
from crossdiff.grid import Grid
from crossdiff.regularize import Mollifier, mollify_reaction, mollify_space, truncate


def test_kernel_is_normalized_nonnegative_and_symmetric():
    for spacings in [(0.01,), (0.02, 0.05), (0.1, 0.03, 0.02)]:
        k = Mollifier(0.04).kernel(spacings)
        assert np.all(k >= 0)
        assert abs(k.sum() - 1.0) < 1e-12
        assert np.array_equal(k, k[::-1, ...])


def test_kernel_support_radius():
    k = Mollifier(0.1).kernel((0.01,))
    assert k.shape == (61,)
    assert k[0] < 1e-25 and k[1] > 1e-6  # weight vanishes at r = R


def test_mollifier_requires_positive_eps():
    with pytest.raises(ValueError):
        Mollifier(0.0)


def test_truncate():
    g = Grid.uniform(5)
    f = g.field(np.array([0.0, 1.0, 2.0, 5.0, 9.0]))
    assert np.array_equal(truncate(f, 10.0).values, f.values)
    assert np.all(truncate(g.constant(5.0), 3.0).values == 3.0)
    once = truncate(f, 2.5)
    assert np.array_equal(truncate(once, 2.5).values, once.values)
    with pytest.raises(ValueError):
        truncate(f, 0.0)


def test_tiny_eps_is_identity():
    g = Grid.uniform(32)
    rng = np.random.default_rng(0)
    f = g.field(rng.uniform(0, 1, 32))
    assert np.allclose(mollify_space(f, Mollifier(0.1 / 32)).values, f.values, atol=1e-12)


def test_constant_interior_is_fixed_and_boundary_leaks():
    g = Grid.uniform(100)
    m = Mollifier(0.02)  # support radius 0.06 = 6 cells
    out = mollify_space(g.constant(2.0), m).values
    assert np.allclose(out[6:-6], 2.0, atol=1e-12)
    assert out[0] < 2.0  # zero extension outside the box
    assert gf.integrate(g.field(out)) < 2.0


def test_constant_interior_fixed_2d():
    g = Grid((1.0, 1.0), (40, 40))
    out = mollify_space(g.constant(1.5), Mollifier(0.02)).values
    assert np.allclose(out[3:-3, 3:-3], 1.5, atol=1e-12)


@given(arrays(np.float64, 50, elements=st.floats(-5, 5)), st.floats(0.005, 0.1))
def test_mollify_does_not_increase_linf(a, eps):
    f = Grid.uniform(50).field(a)
    assert gf.linf(mollify_space(f, Mollifier(eps))) <= gf.linf(f) * (1 + 1e-12) + 1e-300


def test_fft_path_agrees_with_direct():
    g = Grid((1.0, 1.0), (96, 96))
    rng = np.random.default_rng(2)
    f = g.field(rng.uniform(size=g.shape))
    m = Mollifier(0.12)  # kernel 69 x 69 > direct limit
    k = m.kernel(g.h)
    assert k.size > 4096
    from scipy import ndimage
    direct = ndimage.correlate(f.values, k, mode="constant", cval=0.0)
    assert np.allclose(mollify_space(f, m).values, direct, atol=1e-12)


def test_truncation_commutes_with_mollification_on_constants():
    g = Grid.uniform(80)
    m = Mollifier(0.02)
    a = mollify_space(truncate(g.constant(5.0), 3.0), m).values
    b = truncate(mollify_space(g.constant(5.0), m), 3.0).values
    assert np.allclose(a[6:-6], b[6:-6], atol=1e-12)


def test_dyadic_eps_sequence_converges_on_smooth_data():
    g = Grid.uniform(512)
    (x,) = g.centers()
    f = g.field(np.sin(np.pi * x) ** 2)  # vanishes at the boundary: no leak
    errs = [gf.l2_norm(mollify_space(f, Mollifier(e)) - f) for e in (0.08, 0.04, 0.02, 0.01)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def _reaction_oracle(stack, k):
    """Plain loops: edge continuation in time, zero extension in space."""
    nt, nx = stack.shape
    ht, hx = (k.shape[0] - 1) // 2, (k.shape[1] - 1) // 2
    out = np.zeros_like(stack)
    for n in range(nt):
        for i in range(nx):
            acc = 0.0
            for a in range(-ht, ht + 1):
                tn = min(max(n + a, 0), nt - 1)
                for b in range(-hx, hx + 1):
                    j = i + b
                    if 0 <= j < nx:
                        acc += k[a + ht, b + hx] * stack[tn, j]
            out[n, i] = acc
    return out


def test_reaction_three_step_impulse():
    g = Grid.uniform(9)
    m = Mollifier(0.04)
    dt = 0.05
    stack = np.zeros((3, 9))
    stack[1, 4] = 1.0
    out = mollify_reaction([g.field(s) for s in stack], m, dt)
    k = m.kernel((dt, g.h[0]))
    expected = _reaction_oracle(stack, k)
    assert np.allclose(np.stack([f.values for f in out]), expected, atol=1e-15)
    # frozen values of the oracle at the impulse location
    assert out[1].values[4] == pytest.approx(k[k.shape[0] // 2, k.shape[1] // 2], abs=1e-15)


def test_reaction_random_against_oracle():
    g = Grid.uniform(12)
    rng = np.random.default_rng(4)
    stack = rng.uniform(size=(5, 12))
    m = Mollifier(0.05)
    out = mollify_reaction([g.field(s) for s in stack], m, 0.04)
    expected = _reaction_oracle(stack, m.kernel((0.04, g.h[0])))
    assert np.allclose(np.stack([f.values for f in out]), expected, atol=1e-14)


def test_reaction_constant_in_time_is_space_mollification():
    g = Grid.uniform(60)
    rng = np.random.default_rng(8)
    f = g.field(rng.uniform(size=60))
    m = Mollifier(0.02)
    out = mollify_reaction([f] * 4, m, 0.01)
    # time-constant input: the time marginal of the kernel sums out
    k = m.kernel((0.01, g.h[0]))
    spatial = gf.Field(g, np.convolve(f.values, k.sum(axis=0), mode="same"))
    for o in out:
        assert np.allclose(o.values, spatial.values, atol=1e-13)


def test_reaction_rejects_bad_dt():
    g = Grid.uniform(4)
    with pytest.raises(ValueError):
        mollify_reaction([g.constant(1.0)], Mollifier(0.1), 0.0)
