"""Long-time diagnostics: phase-space metric, weak distance, separation, attraction fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cahn_hilliard import CHStepConfig
from .errors import ContractError
from .fluid import gradient_norm_sq, stokes_solve
from .grid import Grid, VectorField
from .operators import gradient_cc, h1_dual_norm, h1_seminorm, l2_norm, mean, vector_inner, vector_l2_norm
from .physics import PhysParams, psi_prime
from .stepper import State, make_state, step

CENSOR = 1e-13


def _same_grid(s1: State, s2: State) -> Grid:
    if s1.grid != s2.grid:
        raise ContractError(f"states live on different grids: {s1.grid} vs {s2.grid}")
    return s1.grid


def h1_norm(grid: Grid, f) -> float:
    return float(np.hypot(l2_norm(grid, f), h1_seminorm(grid, f)))


def vector_h1_norm(grid: Grid, v: VectorField) -> float:
    return float(np.sqrt(vector_inner(grid, v, v) + gradient_norm_sq(grid, v)))


def hessian_parts(grid: Grid, f):
    """Second differences: f_xx and f_yy at cells, f_xy at nodes (zero on walls)."""
    g = gradient_cc(grid, f)
    fxx = (g.u[1:, :] - g.u[:-1, :]) / grid.hx
    fyy = (g.w[:, 1:] - g.w[:, :-1]) / grid.hy
    fxy = np.zeros((grid.nx + 1, grid.ny + 1))
    fxy[1:-1, 1:-1] = (g.u[1:-1, 1:] - g.u[1:-1, :-1]) / grid.hy
    return fxx, fyy, fxy


def _node_weights(grid: Grid) -> np.ndarray:
    w = np.ones((grid.nx + 1, grid.ny + 1))
    w[[0, -1], :] *= 0.5
    w[:, [0, -1]] *= 0.5
    return w


def sobolev2_norm(grid: Grid, f, q: float = 2.0) -> float:
    """Discrete W^{2,q} norm: q-th powers of f, its gradient and Hessian summed.

    The mixed derivative enters twice, as it does in |D^2 f|^2.
    """
    dA = grid.cell_area
    g = gradient_cc(grid, f)
    fxx, fyy, fxy = hessian_parts(grid, f)
    total = (np.sum(np.abs(f) ** q) + np.sum(np.abs(g.u) ** q) + np.sum(np.abs(g.w) ** q)
             + np.sum(np.abs(fxx) ** q) + np.sum(np.abs(fyy) ** q)
             + 2.0 * np.sum(_node_weights(grid) * np.abs(fxy) ** q)) * dA
    return float(total ** (1.0 / q))


def phase_norm(s: State) -> float:
    """||v|| + ||phi||_H1 + ||sigma||."""
    g = s.grid
    return vector_l2_norm(g, s.v) + h1_norm(g, s.phi) + l2_norm(g, s.sigma)


@dataclass(frozen=True)
class PhaseDistance:
    d: float


def phase_distance(s1: State, s2: State) -> PhaseDistance:
    g = _same_grid(s1, s2)
    d = vector_l2_norm(g, s1.v - s2.v) + h1_norm(g, s1.phi - s2.phi) + l2_norm(g, s1.sigma - s2.sigma)
    return PhaseDistance(float(d))


@dataclass(frozen=True)
class WeakDistance:
    W: float
    components: tuple


def weak_distance(s1: State, s2: State) -> WeakDistance:
    """Sum of half the squared weak norms of the differences plus the mean-phase gap."""
    g = _same_grid(s1, s2)
    sol = stokes_solve(g, s1.v - s2.v)
    vel = 0.5 * max(sol.energy_pairing, 0.0)
    dphi = 0.5 * h1_dual_norm(g, s1.phi - s2.phi) ** 2
    dsig = 0.5 * h1_dual_norm(g, s1.sigma - s2.sigma) ** 2
    dmean = abs(mean(g, s1.phi) - mean(g, s2.phi))
    comps = (vel, dphi, dsig, dmean)
    return WeakDistance(float(sum(comps)), comps)


def z_integrand(s: State, p: PhysParams) -> float:
    """||grad v||^2 + ||phi||_{W2,3}^2 + ||phi||_{H2}^4 + ||psi'(phi)||_L1 + ||sigma||_H1^2 + 1."""
    g = s.grid
    w23 = sobolev2_norm(g, s.phi, 3.0)
    h2 = sobolev2_norm(g, s.phi, 2.0)
    l1 = float(np.sum(np.abs(psi_prime(s.phi, p))) * g.cell_area)
    return float(gradient_norm_sq(g, s.v) + w23**2 + h2**4 + l1 + h1_norm(g, s.sigma) ** 2 + 1.0)


def separation_gap(trajectory: Sequence[State], t_min: float) -> float:
    """min over t >= t_min of 1 - max|phi|."""
    window = [s for s in trajectory if s.t >= t_min]
    if not window:
        raise ContractError(f"no states with t >= {t_min}")
    return float(min(1.0 - np.max(np.abs(s.phi)) for s in window))


def hausdorff_semidist(A: Sequence[State], B: Sequence[State]) -> float:
    """max over a in A of min over b in B of the phase distance."""
    if len(A) == 0 or len(B) == 0:
        raise ContractError("Hausdorff semidistance needs nonempty sets")
    return float(max(min(phase_distance(a, b).d for b in B) for a in A))


@dataclass(frozen=True)
class AttractionFit:
    J: float
    omega: float
    rms_log_residual: float
    n_points: int


def fit_exponential_attraction(times, dists) -> AttractionFit:
    t = np.asarray(times, dtype=float)
    d = np.asarray(dists, dtype=float)
    if t.shape != d.shape:
        raise ContractError("times and distances differ in length")
    if np.any(d < 0):
        raise ContractError("distances must be nonnegative")
    keep = d > CENSOR
    if keep.sum() < 4:
        raise ContractError("fewer than 4 distances above the 1e-13 floor")
    t, y = t[keep], np.log(d[keep])
    slope, icpt = np.polyfit(t, y, 1)
    res = y - (slope * t + icpt)
    return AttractionFit(float(np.exp(icpt)), float(-slope), float(np.sqrt(np.mean(res**2))), int(keep.sum()))


def absorbing_entry_time(times, norms, radius: float):
    """First time after which every norm stays within ``radius``; None if never."""
    t = np.asarray(times, dtype=float)
    outside = np.nonzero(np.asarray(norms, dtype=float) > radius)[0]
    if outside.size == 0:
        return float(t[0])
    k = outside[-1] + 1
    return None if k >= t.size else float(t[k])


def integrate(s: State, t_end: float, p: PhysParams, cfg: CHStepConfig, every: int = 1, viscosity=None):
    """Fixed-step trajectory from ``s`` to ``t_end``; returns states every ``every`` steps."""
    n = int(np.floor((t_end - s.t) / cfg.tau + 1e-9))
    out = [s]
    for k in range(1, n + 1):
        s = step(s, cfg.tau, p, cfg, viscosity)
        if k % every == 0 or k == n:
            out.append(s)
    return out


def smooth_bump(grid: Grid) -> np.ndarray:
    """Smoothest mean-free Neumann mode, cos(pi x / Lx)."""
    x, _ = grid.meshgrid()
    b = np.cos(np.pi * x / grid.Lx)
    return b - b.mean()


def smoothing_ratio(s0: State, perturbation_size: float, t: float, p: PhysParams, cfg: CHStepConfig) -> float:
    """Stronger-norm difference at time t over the initial phase distance.

    The perturbation is a mean-free smooth bump added to phi and scaled to
    the requested initial distance.
    """
    if perturbation_size == 0:
        raise ContractError("degenerate pair: zero perturbation")
    if not 0 < perturbation_size <= 1e-2:
        raise ContractError("perturbation size must lie in (0, 1e-2]")
    if not t > 0:
        raise ContractError("t must be positive")
    g = s0.grid
    bump = smooth_bump(g)
    phi1 = s0.phi + bump * (perturbation_size / h1_norm(g, bump))
    if np.max(np.abs(phi1)) >= 1.0:
        raise ContractError("perturbed phase field leaves (-1, 1)")
    s1 = make_state(g, phi1, s0.sigma, p, s0.v, s0.t, s0.p)
    d0 = phase_distance(s0, s1).d
    a = integrate(s0, s0.t + t, p, cfg, every=10**9)[-1]
    b = integrate(s1, s1.t + t, p, cfg, every=10**9)[-1]
    num = vector_h1_norm(g, a.v - b.v) + sobolev2_norm(g, a.phi - b.phi) + h1_norm(g, a.sigma - b.sigma)
    return float(num / d0)
