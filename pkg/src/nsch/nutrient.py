"""Implicit-diffusion step for the nutrient concentration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .grid import Grid, VectorField
from .operators import advect_conservative, laplacian_neumann, mean, solve_helmholtz_neumann
from .physics import PhysParams


@dataclass
class SigmaStepResult:
    sigma_next: np.ndarray
    mean_drift: float


def sigma_step(grid: Grid, sigma_n, phi_next, v_n: VectorField | None, p: PhysParams, tau: float) -> SigmaStepResult:
    """(sigma - sigma_n)/tau + div(v_n sigma_n) = lap(sigma) - chi lap(phi_next).

    The chemotactic flux only sees ``phi_next`` through its Laplacian, so
    the constant in ``chi (1 - phi)`` never enters.
    """
    if not tau > 0:
        raise ContractError("time step must be positive")
    sigma_n = grid.check_scalar(sigma_n, "sigma")
    phi_next = grid.check_scalar(phi_next, "phi")
    rhs = sigma_n / tau - p.chi * laplacian_neumann(grid, phi_next)
    if v_n is not None:
        rhs = rhs - advect_conservative(grid, v_n, sigma_n)
    sigma = solve_helmholtz_neumann(grid, 1.0 / tau, 1.0, rhs)
    return SigmaStepResult(sigma, abs(mean(grid, sigma) - mean(grid, sigma_n)))
