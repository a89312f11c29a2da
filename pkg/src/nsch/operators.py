"""Second-order MAC difference operators, norms and the Neumann Helmholtz solver.

All operators use mirror ghosts for cell-centred scalars (zero normal
flux) and treat boundary faces as carrying the prescribed normal velocity.
With these conventions ``divergence_mac(gradient_cc(f)) == laplacian_neumann(f)``
exactly, and gradient/divergence are negative adjoints in the cell/face
quadrature, so every summation-by-parts identity holds to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ContractError, IncompatibleDataError, SolverError
from .grid import Grid, VectorField

SOLVE_RTOL = 1e-10


def _finite(f, name):
    if not np.all(np.isfinite(f)):
        raise ContractError(f"{name} contains NaN or Inf")


def laplacian_neumann(grid: Grid, f) -> np.ndarray:
    """Five-point Laplacian with homogeneous Neumann ghosts."""
    f = grid.check_scalar(f)
    # written as div(grad f) so the composition identity is bitwise
    gx = np.zeros(grid.u_shape)
    gy = np.zeros(grid.w_shape)
    gx[1:-1, :] = (f[1:, :] - f[:-1, :]) / grid.hx
    gy[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / grid.hy
    return (gx[1:, :] - gx[:-1, :]) / grid.hx + (gy[:, 1:] - gy[:, :-1]) / grid.hy


def gradient_cc(grid: Grid, f) -> VectorField:
    """Centred face differences of a cell field; boundary faces are zero."""
    f = grid.check_scalar(f)
    v = VectorField.zeros(grid)
    v.u[1:-1, :] = (f[1:, :] - f[:-1, :]) / grid.hx
    v.w[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / grid.hy
    return v


def divergence_mac(grid: Grid, v: VectorField) -> np.ndarray:
    grid.check_vector(v)
    return (v.u[1:, :] - v.u[:-1, :]) / grid.hx + (v.w[:, 1:] - v.w[:, :-1]) / grid.hy


def face_average(grid: Grid, f) -> VectorField:
    """Arithmetic mean of the two cells sharing each interior face."""
    f = grid.check_scalar(f)
    v = VectorField.zeros(grid)
    v.u[1:-1, :] = 0.5 * (f[1:, :] + f[:-1, :])
    v.w[:, 1:-1] = 0.5 * (f[:, 1:] + f[:, :-1])
    return v


def advect_conservative(grid: Grid, v: VectorField, f, div_tol: float = 1e-10) -> np.ndarray:
    """Discrete div(v f) with centred face interpolation of ``f``.

    Equals v . grad f when v is divergence-free; boundary faces carry no flux.
    """
    f = grid.check_scalar(f)
    grid.check_vector(v)
    if v.boundary_max() != 0.0:
        raise ContractError("advecting velocity must vanish on boundary faces")
    div_norm = l2_norm(grid, divergence_mac(grid, v))
    if div_norm > div_tol:
        raise ContractError(f"advecting velocity is not divergence-free: ||div v|| = {div_norm:.3e}")
    ff = face_average(grid, f)
    return divergence_mac(grid, VectorField(v.u * ff.u, v.w * ff.w))


def inner(grid: Grid, f, g) -> float:
    return float(np.sum(f * g) * grid.cell_area)


def vector_inner(grid: Grid, a: VectorField, b: VectorField) -> float:
    """Face quadrature; each face is weighted by one cell area."""
    return float((np.sum(a.u * b.u) + np.sum(a.w * b.w)) * grid.cell_area)


def l2_norm(grid: Grid, f) -> float:
    return float(np.sqrt(np.sum(f * f) * grid.cell_area))


def vector_l2_norm(grid: Grid, v: VectorField) -> float:
    return float(np.sqrt(max(vector_inner(grid, v, v), 0.0)))


def mean(grid: Grid, f) -> float:
    return float(np.sum(f) * grid.cell_area / grid.area)


def h1_seminorm(grid: Grid, f) -> float:
    return vector_l2_norm(grid, gradient_cc(grid, f))


@lru_cache(maxsize=32)
def neumann_eigenvalues(grid: Grid) -> np.ndarray:
    """Eigenvalues of ``-laplacian_neumann`` in the DCT-II basis, shape ``(nx, ny)``."""
    lx = (4.0 / grid.hx**2) * np.sin(np.pi * np.arange(grid.nx) / (2 * grid.nx)) ** 2
    ly = (4.0 / grid.hy**2) * np.sin(np.pi * np.arange(grid.ny) / (2 * grid.ny)) ** 2
    lam = lx[:, None] + ly[None, :]
    lam.setflags(write=False)
    return lam


def dct2(f):
    return sfft.dctn(f, type=2, norm="ortho", workers=1)


def idct2(fh):
    return sfft.idctn(fh, type=2, norm="ortho", workers=1)


def solve_helmholtz_neumann(grid: Grid, a: float, b: float, f, check: bool = True) -> np.ndarray:
    """Solve ``a u - b lap(u) = f`` with homogeneous Neumann conditions.

    The operator is diagonal in the DCT-II basis, so the solve is direct.
    For ``a == 0`` the data must be mean-free and the returned solution is
    mean-free.
    """
    f = grid.check_scalar(f)
    _finite(f, "right-hand side")
    if a < 0 or b <= 0:
        raise ContractError("need a >= 0 and b > 0")
    if a == 0:
        fbar = mean(grid, f)
        scale = max(1.0, float(np.sqrt(np.mean(f * f))))
        if abs(fbar) > 1e-10 * scale:
            raise IncompatibleDataError(
                f"pure Neumann problem needs mean-free data, got mean {fbar:.3e}"
            )
        f = f - fbar
    denom = a + b * neumann_eigenvalues(grid)
    fh = dct2(f)
    if a == 0:
        denom = denom.copy()
        denom[0, 0] = 1.0
        fh[0, 0] = 0.0
    u = idct2(fh / denom)
    if a == 0:
        u -= mean(grid, u)
    if check:
        r = f - (a * u - b * laplacian_neumann(grid, u))
        fn = np.linalg.norm(f)
        if fn > 0 and np.linalg.norm(r) > SOLVE_RTOL * fn:
            raise SolverError("Neumann Helmholtz solve lost accuracy", np.linalg.norm(r) / fn)
    return u


@dataclass(frozen=True)
class NormReport:
    l2: float
    h1_semi: float
    h1_dual: float
    mean: float


def h1_dual_norm(grid: Grid, f) -> float:
    """(H^1)' norm: sqrt((f, u)) where u - lap(u) = f."""
    u = solve_helmholtz_neumann(grid, 1.0, 1.0, f)
    return float(np.sqrt(max(inner(grid, f, u), 0.0)))


def norms(grid: Grid, f) -> NormReport:
    f = grid.check_scalar(f)
    _finite(f, "field")
    return NormReport(
        l2=l2_norm(grid, f),
        h1_semi=h1_seminorm(grid, f),
        h1_dual=h1_dual_norm(grid, f),
        mean=mean(grid, f),
    )


def poincare_constant(grid: Grid, iters: int = 500, seed: int = 0) -> float:
    """Discrete Poincare-Wirtinger constant 1/sqrt(lambda_1).

    lambda_1 (smallest nonzero eigenvalue of -lap) is found by power
    iteration on the mean-free inverse Laplacian.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(grid.shape)
    x -= x.mean()
    mu_old = 0.0
    for _ in range(iters):
        y = solve_helmholtz_neumann(grid, 0.0, 1.0, x, check=False)
        mu = np.linalg.norm(y) / np.linalg.norm(x)
        x = y / np.linalg.norm(y)
        if abs(mu - mu_old) <= 1e-13 * mu:
            break
        mu_old = mu
    return float(np.sqrt(mu))
