import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_velocity, smooth_phi
from nsch.errors import ContractError, IncompatibleDataError
from nsch.grid import Grid, VectorField
from nsch.operators import (
    advect_conservative, divergence_mac, face_average, gradient_cc, h1_dual_norm, inner,
    laplacian_neumann, mean, neumann_eigenvalues, norms, poincare_constant,
    solve_helmholtz_neumann, vector_inner,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def field(shape):
    return arrays(np.float64, shape, elements=finite)


def test_grid_rejects_tiny_and_nonpositive():
    with pytest.raises(ContractError):
        Grid(3, 8)
    with pytest.raises(ContractError):
        Grid(8, 8, Lx=0.0)
    with pytest.raises(ContractError):
        Grid(8, 8, Ly=-1.0)


def test_grid_geometry():
    g = Grid(8, 4, Lx=2.0, Ly=1.0)
    assert g.hx == 0.25 and g.hy == 0.25
    assert g.u_shape == (9, 4) and g.w_shape == (8, 5)
    assert np.isclose(g.x[0], 0.125) and np.isclose(g.x[-1], 1.875)
    assert g.area == 2.0


def test_shape_mismatch_is_reported():
    g = Grid(8, 8)
    with pytest.raises(ContractError, match="shape"):
        laplacian_neumann(g, np.zeros((8, 7)))
    with pytest.raises(ContractError):
        divergence_mac(g, VectorField(np.zeros((8, 8)), np.zeros((8, 9))))


@given(field((4 * 5 + 5 * 4,)))
def test_interior_pack_roundtrip(x):
    g = Grid(5, 5)
    v = VectorField.from_interior(g, x)
    assert np.array_equal(v.interior(), x)
    assert v.boundary_max() == 0.0
    with pytest.raises(ContractError):
        VectorField.from_interior(g, x[:-1])


@given(field((6, 5)), field((7, 5)), field((6, 6)))
def test_summation_by_parts(f, u, w):
    g = Grid(6, 5, Lx=1.3, Ly=0.7)
    v = VectorField(u, w).with_zero_boundary()
    lhs = vector_inner(g, gradient_cc(g, f), v)
    rhs = -inner(g, f, divergence_mac(g, v))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs) + np.abs(f).sum() * np.abs(u).sum())


@given(field((7, 6)))
def test_div_grad_is_laplacian_bitwise(f):
    g = Grid(7, 6)
    assert np.array_equal(divergence_mac(g, gradient_cc(g, f)), laplacian_neumann(g, f))


def test_laplacian_kernel_and_symmetry(rng):
    g = Grid(9, 7, Lx=1.0, Ly=2.0)
    assert np.abs(laplacian_neumann(g, np.full(g.shape, 3.7))).max() < 1e-12
    a, b = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    assert np.isclose(inner(g, laplacian_neumann(g, a), b), inner(g, a, laplacian_neumann(g, b)), rtol=1e-12)
    assert inner(g, laplacian_neumann(g, a), a) <= 0


def test_laplacian_second_order():
    errs = []
    for n in (16, 32, 64):
        g = Grid(n, n)
        f = smooth_phi(g, 1.0, 1, 2)
        errs.append(np.abs(laplacian_neumann(g, f) + 5 * np.pi**2 * f).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.1)


def test_dct_eigenvalues_match_operator():
    g = Grid(8, 6)
    lam = neumann_eigenvalues(g)
    x, y = g.meshgrid()
    mode = np.cos(2 * np.pi * x) * np.cos(np.pi * y)  # k = 2, l = 1
    assert np.allclose(-laplacian_neumann(g, mode), lam[2, 1] * mode, atol=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_helmholtz_residual(a, b, seed):
    g = Grid(12, 10)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    u = solve_helmholtz_neumann(g, a, b, f)
    assert np.linalg.norm(a * u - b * laplacian_neumann(g, u) - f) <= 1e-10 * np.linalg.norm(f)


def test_pure_neumann_solve_is_mean_free(rng):
    g = Grid(16, 12)
    f = rng.standard_normal(g.shape)
    f -= f.mean()
    u = solve_helmholtz_neumann(g, 0.0, 1.0, f)
    assert abs(mean(g, u)) < 1e-14
    assert np.allclose(-laplacian_neumann(g, u), f, atol=1e-10)


def test_incompatible_data_rejected():
    g = Grid(8, 8)
    with pytest.raises(IncompatibleDataError):
        solve_helmholtz_neumann(g, 0.0, 1.0, np.ones(g.shape))


def test_helmholtz_rejects_nonfinite():
    g = Grid(8, 8)
    f = np.zeros(g.shape)
    f[2, 2] = np.nan
    with pytest.raises(ContractError):
        solve_helmholtz_neumann(g, 1.0, 1.0, f)


def test_advection_is_conservative_and_skew(rng):
    g = Grid(12, 12)
    v = random_velocity(g, rng)
    f = rng.standard_normal(g.shape)
    a = advect_conservative(g, v, f)
    assert abs(a.sum()) < 1e-10
    # div-free transport neither creates nor destroys the L2 norm
    assert abs(inner(g, a, f)) < 1e-10 * inner(g, f, f) * np.abs(v.u).max() * g.nx


def test_advection_rejects_bad_velocity(rng):
    g = Grid(8, 8)
    v = random_velocity(g, rng)
    bad = v.copy()
    bad.u[0, 3] = 1.0
    with pytest.raises(ContractError, match="boundary"):
        advect_conservative(g, bad, np.zeros(g.shape))
    rough = VectorField(rng.standard_normal(g.u_shape), rng.standard_normal(g.w_shape)).with_zero_boundary()
    with pytest.raises(ContractError, match="divergence"):
        advect_conservative(g, rough, np.zeros(g.shape))


def test_face_average_of_constant():
    g = Grid(6, 6)
    fa = face_average(g, np.full(g.shape, 2.0))
    assert np.all(fa.u[1:-1] == 2.0) and np.all(fa.u[[0, -1]] == 0.0)


def test_norm_report(rng):
    g = Grid(16, 16)
    f = rng.standard_normal(g.shape)
    r = norms(g, f)
    assert r.h1_dual <= r.l2 + 1e-14
    assert np.isclose(r.mean, f.mean())
    assert np.isclose(r.l2, np.sqrt(inner(g, f, f)))
    # a constant has dual norm equal to its L2 norm
    assert np.isclose(h1_dual_norm(g, np.full(g.shape, 2.0)), 2.0)


def test_poincare_constant():
    g = Grid(32, 32)
    lam1 = (4 / g.hx**2) * np.sin(np.pi / (2 * g.nx)) ** 2
    assert np.isclose(poincare_constant(g), 1 / np.sqrt(lam1), rtol=1e-8)
    assert abs(poincare_constant(g) - 1 / np.pi) < 1e-3
