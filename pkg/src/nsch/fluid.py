"""Incompressible flow on the MAC grid: projection, Stokes inverse and the momentum step.

Velocity gradients are sampled where they are naturally centred: normal
derivatives at cell centres, tangential ones at cell corners (nodes).
Tangential derivatives on walls use the odd (no-slip) ghost, which gives
``2 u / h``; wall nodes carry half weight and corners a quarter, so the
quadratic forms below reproduce the usual ghost-cell MAC stencils.  All
operators act on the packed vector of interior faces
(:meth:`VectorField.interior`).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .errors import ContractError, SolverError
from .grid import Grid, VectorField
from .operators import (
    divergence_mac, face_average, gradient_cc, l2_norm, solve_helmholtz_neumann, vector_inner,
)
from .physics import PhysParams, eta

DIV_TOL = 1e-10


@dataclass(frozen=True)
class _MacOps:
    n_u: int
    n_w: int
    exx: sp.csr_matrix      # cells <- interior faces: du/dx
    eyy: sp.csr_matrix      # cells <- interior faces: dw/dy
    uy: sp.csr_matrix       # nodes <- interior faces: du/dy
    wx: sp.csr_matrix       # nodes <- interior faces: dw/dx
    node_weight: np.ndarray  # (nx+1)*(ny+1) quadrature weights
    div: sp.csr_matrix      # cells <- interior faces
    lap: sp.csr_matrix      # vector Laplacian (positive), i.e. grad^T grad


@lru_cache(maxsize=16)
def mac_ops(grid: Grid) -> _MacOps:
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    n_u = (nx - 1) * ny
    n_w = nx * (ny - 1)

    def ucol(i, j):  # u face (i, j), i in 1..nx-1
        return (i - 1) * ny + j

    def wcol(i, j):  # w face (i, j), j in 1..ny-1
        return n_u + i * (ny - 1) + (j - 1)

    def cell(i, j):
        return i * ny + j

    def node(i, j):
        return i * (ny + 1) + j

    exx, eyy, uy, wx = ([], [], []), ([], [], []), ([], [], []), ([], [], [])

    def add(m, r, c, v):
        m[0].append(r)
        m[1].append(c)
        m[2].append(v)

    for i in range(nx):
        for j in range(ny):
            if i + 1 <= nx - 1:
                add(exx, cell(i, j), ucol(i + 1, j), 1 / hx)
            if i >= 1:
                add(exx, cell(i, j), ucol(i, j), -1 / hx)
            if j + 1 <= ny - 1:
                add(eyy, cell(i, j), wcol(i, j + 1), 1 / hy)
            if j >= 1:
                add(eyy, cell(i, j), wcol(i, j), -1 / hy)
    for i in range(1, nx):
        for j in range(ny + 1):
            # du/dy at node (i, j) from u faces (i, j-1) and (i, j)
            if j == 0:
                add(uy, node(i, j), ucol(i, 0), 2 / hy)
            elif j == ny:
                add(uy, node(i, j), ucol(i, ny - 1), -2 / hy)
            else:
                add(uy, node(i, j), ucol(i, j), 1 / hy)
                add(uy, node(i, j), ucol(i, j - 1), -1 / hy)
    for j in range(1, ny):
        for i in range(nx + 1):
            if i == 0:
                add(wx, node(i, j), wcol(0, j), 2 / hx)
            elif i == nx:
                add(wx, node(i, j), wcol(nx - 1, j), -2 / hx)
            else:
                add(wx, node(i, j), wcol(i, j), 1 / hx)
                add(wx, node(i, j), wcol(i - 1, j), -1 / hx)

    n_int = n_u + n_w
    nc, nn = nx * ny, (nx + 1) * (ny + 1)

    def mat(m, nrows):
        return sp.csr_matrix((m[2], (m[0], m[1])), shape=(nrows, n_int))

    Exx, Eyy, Uy, Wx = mat(exx, nc), mat(eyy, nc), mat(uy, nn), mat(wx, nn)
    wgt = np.ones((nx + 1, ny + 1))
    wgt[[0, -1], :] *= 0.5
    wgt[:, [0, -1]] *= 0.5
    wgt = wgt.ravel()
    W = sp.diags(wgt)
    lap = (Exx.T @ Exx + Eyy.T @ Eyy + Uy.T @ W @ Uy + Wx.T @ W @ Wx).tocsr()
    return _MacOps(n_u, n_w, Exx, Eyy, Uy, Wx, wgt, (Exx + Eyy).tocsr(), lap)


def node_average(grid: Grid, f) -> np.ndarray:
    """Mean of the cells touching each node, shape ``(nx+1, ny+1)``."""
    g = np.pad(f, 1, mode="edge")
    return 0.25 * (g[1:, 1:] + g[:-1, 1:] + g[1:, :-1] + g[:-1, :-1])


def viscosity_fields(grid: Grid, phi, p: PhysParams):
    return eta(phi, p), eta(node_average(grid, phi), p)


def viscous_operator(grid: Grid, eta_cells, eta_nodes) -> sp.csr_matrix:
    """Matrix of -div(2 eta D v) on interior faces (symmetric positive definite)."""
    ops = mac_ops(grid)
    hc = sp.diags(np.asarray(eta_cells).ravel())
    hn = sp.diags(np.asarray(eta_nodes).ravel() * ops.node_weight)
    shear = ops.uy + ops.wx
    return (2 * (ops.exx.T @ hc @ ops.exx) + 2 * (ops.eyy.T @ hc @ ops.eyy) + shear.T @ hn @ shear).tocsr()


def gradient_norm_sq(grid: Grid, v: VectorField) -> float:
    """||grad v||^2 in the same quadrature as the vector Laplacian."""
    ops = mac_ops(grid)
    x = v.interior()
    return float(x @ (ops.lap @ x)) * grid.cell_area


def strain_norm_sq(grid: Grid, v: VectorField, weight_cells=None, weight_nodes=None) -> float:
    """sum |Dv|^2 (optionally weighted by a viscosity) times the cell area."""
    ops = mac_ops(grid)
    x = v.interior()
    a, b = ops.exx @ x, ops.eyy @ x
    s = 0.5 * ((ops.uy @ x) + (ops.wx @ x))
    wc = 1.0 if weight_cells is None else np.asarray(weight_cells).ravel()
    wn = ops.node_weight if weight_nodes is None else ops.node_weight * np.asarray(weight_nodes).ravel()
    return float(np.sum(wc * (a * a + b * b)) + 2 * np.sum(wn * s * s)) * grid.cell_area


def viscous_dissipation(grid: Grid, v: VectorField, phi, p: PhysParams) -> float:
    ec, en = viscosity_fields(grid, phi, p)
    return 2.0 * strain_norm_sq(grid, v, ec, en)


# --- fast inverses of the constant-coefficient vector Laplacian -------------

@lru_cache(maxsize=16)
def _dst_eigs(grid: Grid):
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    sx = lambda k, n, h: (4.0 / h**2) * np.sin(np.pi * k / (2 * n)) ** 2  # noqa: E731
    lu = sx(np.arange(1, nx), nx, hx)[:, None] + sx(np.arange(1, ny + 1), ny, hy)[None, :]
    lw = sx(np.arange(1, nx + 1), nx, hx)[:, None] + sx(np.arange(1, ny), ny, hy)[None, :]
    return lu, lw


def _apply_spectral(grid: Grid, x, fn):
    """Apply ``fn(eigs)`` as a multiplier in the sine basis of each component."""
    lu, lw = _dst_eigs(grid)
    n_u = (grid.nx - 1) * grid.ny
    u = x[:n_u].reshape(grid.nx - 1, grid.ny)
    w = x[n_u:].reshape(grid.nx, grid.ny - 1)
    uh = sfft.dst(sfft.dst(u, type=1, axis=0, norm="ortho"), type=2, axis=1, norm="ortho")
    wh = sfft.dst(sfft.dst(w, type=2, axis=0, norm="ortho"), type=1, axis=1, norm="ortho")
    uh *= fn(lu)
    wh *= fn(lw)
    u = sfft.idst(sfft.idst(uh, type=2, axis=1, norm="ortho"), type=1, axis=0, norm="ortho")
    w = sfft.idst(sfft.idst(wh, type=1, axis=1, norm="ortho"), type=2, axis=0, norm="ortho")
    return np.concatenate([u.ravel(), w.ravel()])


def vector_laplacian_solve(grid: Grid, x, shift: float = 0.0, scale: float = 1.0):
    """Solve ``(shift + scale * K) y = x`` with K the no-slip vector Laplacian."""
    return _apply_spectral(grid, x, lambda lam: 1.0 / (shift + scale * lam))


# --- projection and Stokes ----------------------------------------------------

def leray_project(grid: Grid, v: VectorField) -> VectorField:
    """Discrete Helmholtz-Leray projection onto divergence-free, no-penetration fields."""
    grid.check_vector(v)
    if not v.is_finite():
        raise ContractError("velocity contains NaN or Inf")
    v0 = v.with_zero_boundary()
    g = solve_helmholtz_neumann(grid, 0.0, 1.0, -divergence_mac(grid, v0))
    return v0 - gradient_cc(grid, g)


@dataclass
class StokesSolution:
    u: VectorField
    p: np.ndarray
    energy_pairing: float
    iterations: int = 0


def _cg(apply, b, precond=None, rtol=1e-14, atol=0.0, maxiter=1000, project=None):
    """Plain preconditioned conjugate gradients (deterministic, no restarts)."""
    x = np.zeros_like(b)
    r = b.copy()
    if project is not None:
        r = project(r)
    bnorm = np.linalg.norm(r)
    tol = max(rtol * bnorm, atol)
    if bnorm <= tol or bnorm == 0.0:
        return x, 0, bnorm
    z = precond(r) if precond else r
    if project is not None:
        z = project(z)
    d = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        ad = apply(d)
        alpha = rz / (d @ ad)
        x += alpha * d
        r -= alpha * ad
        if project is not None:
            r = project(r)
        rn = np.linalg.norm(r)
        if rn <= tol:
            return x, k, rn
        z = precond(r) if precond else r
        if project is not None:
            z = project(z)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    return x, maxiter, np.linalg.norm(r)


def stokes_solve(grid: Grid, f: VectorField, tol: float = 1e-13, maxiter: int = 2000) -> StokesSolution:
    """Solve ``-lap u + grad p = P f``, ``div u = 0``, ``u = 0`` on the boundary.

    Uses conjugate gradients on the pressure Schur complement
    ``D K^-1 D^T`` over mean-free pressures; K^-1 is applied exactly in the
    sine basis.
    """
    grid.check_vector(f)
    pf = leray_project(grid, f)
    ops = mac_ops(grid)
    D = ops.div
    b_mom = pf.interior()
    kinv_f = vector_laplacian_solve(grid, b_mom)

    def centre(q):
        return q - q.mean()

    def schur(q):
        # G = -D^T in the face/cell quadrature
        return D @ vector_laplacian_solve(grid, D.T @ q)

    rhs = -(D @ kinv_f)
    pvec, its, res = _cg(schur, rhs, rtol=tol, atol=1e-3 * tol * np.linalg.norm(b_mom),
                         maxiter=maxiter, project=centre)
    x = vector_laplacian_solve(grid, b_mom + D.T @ pvec)
    u = VectorField.from_interior(grid, x)
    div_res = l2_norm(grid, divergence_mac(grid, u))
    if div_res > DIV_TOL * max(1.0, np.sqrt(vector_inner(grid, pf, pf))):
        raise SolverError("Stokes Schur iteration did not converge", div_res)
    p = pvec.reshape(grid.shape)
    p = p - p.mean()
    return StokesSolution(u, p, vector_inner(grid, pf, u), its)


# --- Navier-Stokes step ------------------------------------------------------

def advection_mac(grid: Grid, v: VectorField) -> VectorField:
    """Centred conservative div(v v) on interior faces (boundary entries are zero)."""
    u, w, hx, hy = v.u, v.w, grid.hx, grid.hy
    uc = 0.5 * (u[1:, :] + u[:-1, :])
    wc = 0.5 * (w[:, 1:] + w[:, :-1])
    u_ext = np.concatenate([-u[:, :1], u, -u[:, -1:]], axis=1)
    w_ext = np.concatenate([-w[:1, :], w, -w[-1:, :]], axis=0)
    un = 0.5 * (u_ext[:, 1:] + u_ext[:, :-1])
    wn = 0.5 * (w_ext[1:, :] + w_ext[:-1, :])
    uw = un * wn
    out = VectorField.zeros(grid)
    out.u[1:-1, :] = (uc[1:, :] ** 2 - uc[:-1, :] ** 2) / hx + (uw[1:-1, 1:] - uw[1:-1, :-1]) / hy
    out.w[:, 1:-1] = (wc[:, 1:] ** 2 - wc[:, :-1] ** 2) / hy + (uw[1:, 1:-1] - uw[:-1, 1:-1]) / hx
    return out


def capillary_force(grid: Grid, phi, mu, sigma, p: PhysParams) -> VectorField:
    """(mu + chi sigma) grad phi on faces, prefactor averaged to the face."""
    m = face_average(grid, mu + p.chi * sigma)
    g = gradient_cc(grid, phi)
    return VectorField(m.u * g.u, m.w * g.w)


@dataclass
class FluidStepResult:
    v_next: VectorField
    p_next: np.ndarray
    div_residual: float
    momentum_iters: int = 0


def ns_step(grid: Grid, v_n: VectorField, phi_next, mu_next, sigma_next, p: PhysParams, tau: float,
            p_prev=None, viscosity: float | None = None, rtol: float = 1e-13) -> FluidStepResult:
    """Incremental pressure-correction step with implicit variable viscosity.

    ``p_prev`` is the old pressure (zero if omitted); ``viscosity``
    overrides the phase-dependent law with a constant.
    """
    if not tau > 0:
        raise ContractError("time step must be positive")
    grid.check_vector(v_n)
    p_n = grid.zeros() if p_prev is None else grid.check_scalar(p_prev, "pressure")
    if np.max(np.abs(phi_next)) >= 1.0:
        raise ContractError("phase field must satisfy |phi| < 1")
    if viscosity is None:
        ec, en = viscosity_fields(grid, phi_next, p)
    else:
        ec = np.full(grid.shape, float(viscosity))
        en = np.full((grid.nx + 1, grid.ny + 1), float(viscosity))
    A = viscous_operator(grid, ec, en)
    mat = A + sp.identity(A.shape[0], format="csr") / tau

    rhs = (v_n * (1.0 / tau) - advection_mac(grid, v_n) - gradient_cc(grid, p_n)
           + capillary_force(grid, phi_next, mu_next, sigma_next, p))
    b = rhs.interior()
    # grad-div roughly doubles the Laplacian on gradient modes
    eta_ref = 1.5 * float(np.sqrt(ec.min() * ec.max()))
    x, its, res = _cg(lambda y: mat @ y, b, lambda r: vector_laplacian_solve(grid, r, 1.0 / tau, eta_ref),
                      rtol=rtol, maxiter=2000)
    if not np.isfinite(res) or res > max(1e3 * rtol * np.linalg.norm(b), 1e-300):
        raise SolverError("momentum solve did not converge", res)
    v_star = VectorField.from_interior(grid, x)

    psi = solve_helmholtz_neumann(grid, 0.0, 1.0, -divergence_mac(grid, v_star) / tau)
    v_next = v_star - gradient_cc(grid, psi) * tau
    p_next = p_n + psi
    p_next = p_next - p_next.mean()
    div_res = l2_norm(grid, divergence_mac(grid, v_next))
    if div_res > DIV_TOL:
        raise SolverError("projection left a divergent velocity", div_res)
    return FluidStepResult(v_next, p_next, div_res, its)
