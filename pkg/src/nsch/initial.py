"""Named initial-condition generators."""
from __future__ import annotations

import numpy as np

from .errors import ContractError
from .grid import Grid, VectorField
from .physics import PhysParams
from .stepper import State, make_state

GENERATORS = ("spinodal", "bubble", "quiescent")


def spinodal_phi(grid: Grid, mean_value: float, amplitude: float = 0.05, seed: int = 0) -> np.ndarray:
    """Uniform noise of the given amplitude about ``mean_value``; the noise is made mean-free."""
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, grid.shape)
    noise -= noise.mean()
    noise *= amplitude / max(np.max(np.abs(noise)), 1e-300)
    return mean_value + noise


def bubble_phi(grid: Grid, p: PhysParams, radius: float = 0.25, centre=None, depth: float = 0.95) -> np.ndarray:
    """tanh disc, +depth inside, interface width sqrt(B/A)."""
    x, y = grid.meshgrid()
    cx, cy = (0.5 * grid.Lx, 0.5 * grid.Ly) if centre is None else centre
    r = np.hypot(x - cx, y - cy)
    return depth * np.tanh((radius - r) / np.sqrt(p.B / p.A))


def streamfunction_velocity(grid: Grid, amplitude: float = 1.0) -> VectorField:
    """Discretely divergence-free no-slip vortex from psi = a sin^2(pi x) sin^2(pi y) at nodes."""
    xn = np.arange(grid.nx + 1) * grid.hx / grid.Lx
    yn = np.arange(grid.ny + 1) * grid.hy / grid.Ly
    psi = amplitude * np.outer(np.sin(np.pi * xn) ** 2, np.sin(np.pi * yn) ** 2)
    u = (psi[:, 1:] - psi[:, :-1]) / grid.hy
    w = -(psi[1:, :] - psi[:-1, :]) / grid.hx
    v = VectorField(u, w)
    return v.with_zero_boundary()


def sigma_mode(grid: Grid, amplitude: float) -> np.ndarray:
    """Mean-free cos(pi x) cos(pi y) mode of the nutrient."""
    x, y = grid.meshgrid()
    m = np.cos(np.pi * x / grid.Lx) * np.cos(np.pi * y / grid.Ly)
    return amplitude * (m - m.mean())


def initial_state(grid: Grid, p: PhysParams, kind: str = "spinodal", seed: int = 0, amplitude: float = 0.05,
                  mean_phi: float | None = None, sigma0: float | None = None,
                  velocity_amplitude: float = 0.0, radius: float = 0.25) -> State:
    """Build an admissible initial state; ``sigma0`` defaults to m2/2."""
    m = p.c0 if mean_phi is None else mean_phi
    if kind == "spinodal":
        phi = spinodal_phi(grid, m, amplitude, seed)
    elif kind == "bubble":
        phi = bubble_phi(grid, p, radius)
    elif kind == "quiescent":
        phi = np.full(grid.shape, float(m))
    else:
        raise ContractError(f"unknown initial condition {kind!r}; choose from {GENERATORS}")
    if np.max(np.abs(phi)) >= 1.0:
        raise ContractError("initial phase field leaves (-1, 1)")
    s0 = 0.5 * p.m2 if sigma0 is None else float(sigma0)
    sigma = np.full(grid.shape, s0)
    v = streamfunction_velocity(grid, velocity_amplitude) if velocity_amplitude else None
    return make_state(grid, phi, sigma, p, v)
