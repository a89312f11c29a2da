"""Convex-splitting step of the convective Cahn-Hilliard-Oono equation.

One step solves, for the new phase field and chemical potential,

    (phi - phi_n)/tau + div(v_n phi_n) = lap(mu) - alpha (phi - c0)
    mu = A psi0'(phi) - A theta0 phi_n - B lap(phi) - chi sigma_n

The logarithmic part is implicit, the concave quadratic part and all
couplings are lagged.  Because ``mu`` is an explicit function of ``phi``
the Newton iteration runs on ``phi`` alone; each Jacobian solve uses GMRES
preconditioned by the constant-coefficient operator, which is diagonal in
the DCT basis.  A backtracking line search keeps every iterate strictly
inside (-1, 1).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import BarrierError, ContractError, NewtonError, PotentialDomainError
from .grid import Grid, VectorField
from .operators import (
    advect_conservative, dct2, gradient_cc, idct2, laplacian_neumann, mean, neumann_eigenvalues,
    vector_inner,
)
from .physics import PhysParams, psi0_prime, psi0_second, psi_value

log = logging.getLogger(__name__)

MAX_HALVINGS = 30


@dataclass(frozen=True)
class CHStepConfig:
    tau: float
    newton_tol: float = 1e-11
    newton_max: int = 50
    clip_margin: float = 1e-12
    linear_rtol: float = 1e-13

    def __post_init__(self):
        if not self.tau > 0:
            raise ContractError("time step must be positive")
        if not 0 < self.clip_margin < 1e-6:
            raise ContractError("clip_margin must lie in (0, 1e-6)")


@dataclass
class CHStepResult:
    phi_next: np.ndarray
    mu_next: np.ndarray
    newton_iters: int
    mass_residual: float
    mean_prev: float = 0.0
    residuals: list = field(default_factory=list)


class _Newton:
    """Residual and linearisation of one implicit step, all matrix-free."""

    def __init__(self, grid, phi_n, sigma_n, v_n, p, cfg):
        self.grid, self.p, self.cfg = grid, p, cfg
        tau = cfg.tau
        self.a = 1.0 + p.alpha * tau
        self.lam = neumann_eigenvalues(grid)
        adv = advect_conservative(grid, v_n, phi_n) if v_n is not None else 0.0
        self.rhs = phi_n - tau * adv + p.alpha * tau * p.c0
        self.mu_explicit = -p.A * p.theta0 * phi_n - p.chi * sigma_n

    def lap(self, f):
        return laplacian_neumann(self.grid, f)

    def mu(self, phi):
        p = self.p
        return p.A * psi0_prime(phi, p) + self.mu_explicit - p.B * self.lap(phi)

    def residual(self, phi):
        return self.a * phi - self.cfg.tau * self.lap(self.mu(phi)) - self.rhs

    def set_linearisation(self, phi):
        p, tau = self.p, self.cfg.tau
        self.q = p.A * psi0_second(phi, p)
        self.pdiag = self.a + tau * float(self.q.mean()) * self.lam + tau * p.B * self.lam**2

    def precondition(self, r):
        return idct2(dct2(r) / self.pdiag)

    def jacobian(self, d):
        tau, B = self.cfg.tau, self.p.B
        return self.a * d - tau * self.lap(self.q * d) + tau * B * self.lap(self.lap(d))

    def solve_linear(self, r):
        """Newton correction for residual ``r`` (solves J d = -r)."""
        shape = self.grid.shape
        n = r.size

        def matvec(x):
            return self.precondition(self.jacobian(x.reshape(shape))).ravel()

        op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
        b = -self.precondition(r).ravel()
        d, _ = spla.gmres(
            op, b, rtol=self.cfg.linear_rtol, atol=1e-3 * self.cfg.newton_tol,
            restart=min(n, 100), maxiter=2,
        )
        d = d.reshape(shape)
        # Summing J d = -r over cells leaves a * sum(d) = -sum(r) exactly.
        d += -mean(self.grid, r) / self.a - mean(self.grid, d)
        return d


def ch_step(grid: Grid, phi_n, sigma_n, v_n: VectorField | None, p: PhysParams, cfg: CHStepConfig) -> CHStepResult:
    phi_n = grid.check_scalar(phi_n, "phi")
    sigma_n = grid.check_scalar(sigma_n, "sigma")
    if np.max(np.abs(phi_n)) >= 1.0:
        raise PotentialDomainError("phase field must satisfy |phi| < 1 before the step")
    lim = 1.0 - cfg.clip_margin
    nw = _Newton(grid, phi_n, sigma_n, v_n, p, cfg)

    phi = np.clip(phi_n, -lim, lim)
    r = nw.residual(phi)
    history = []
    clipped_run = 0
    iters = 0
    while True:
        nw.set_linearisation(phi)
        pr = nw.precondition(r)
        res_inf = float(np.max(np.abs(pr)))
        history.append(res_inf)
        if res_inf <= cfg.newton_tol:
            break
        if iters >= cfg.newton_max:
            raise NewtonError(f"no convergence in {cfg.newton_max} Newton iterations", res_inf)
        d = nw.solve_linear(r)
        res_norm = float(np.linalg.norm(pr))
        step = 1.0
        hit_clip = False
        for _ in range(MAX_HALVINGS + 1):
            trial = phi + step * d
            if np.max(np.abs(trial)) > lim:
                hit_clip = True
            else:
                r_trial = nw.residual(trial)
                pr_trial = nw.precondition(r_trial)
                if np.linalg.norm(pr_trial) < res_norm or np.max(np.abs(pr_trial)) <= cfg.newton_tol:
                    break
            step *= 0.5
        else:
            raise NewtonError("line search failed after 30 halvings", res_inf)
        clipped_run = clipped_run + 1 if hit_clip else 0
        if clipped_run > cfg.newton_max // 2:
            raise BarrierError("Newton iterates pinned at the |phi| < 1 barrier; reduce tau", res_inf)
        phi, r = trial, r_trial
        iters += 1
        if step == 1.0 and np.max(np.abs(d)) <= cfg.newton_tol:
            history.append(float(np.max(np.abs(nw.precondition(r)))))
            break

    if len(history) >= 3:
        tail = history[-1] / max(history[-2] ** 2, 1e-300)
        log.debug("Newton tail ratio r_k+1/r_k^2 = %.3e", tail)
    mu_next = nw.mu(phi)
    m_prev, m_next = mean(grid, phi_n), mean(grid, phi)
    mass_res = abs((m_next - p.c0) - (m_prev - p.c0) / nw.a)
    return CHStepResult(phi, mu_next, iters, mass_res, m_prev, history)


def discrete_mass_law(history, p: PhysParams, cfg: CHStepConfig, grid: Grid) -> float:
    """Largest deviation of mean(phi^n) - c0 from its geometric law (1 + alpha tau)^-n."""
    if not history:
        raise ValueError("empty history")
    dev0 = history[0].mean_prev - p.c0
    ratio = 1.0 / (1.0 + p.alpha * cfg.tau)
    worst = 0.0
    for n, res in enumerate(history, start=1):
        dev = mean(grid, res.phi_next) - p.c0
        worst = max(worst, abs(dev - dev0 * ratio**n))
    return worst


def fitted_decay_rate(times, deviations) -> float:
    """Least-squares slope of -log|dev| against t."""
    t = np.asarray(times, dtype=float)
    d = np.abs(np.asarray(deviations, dtype=float))
    slope = np.polyfit(t, np.log(d), 1)[0]
    return float(-slope)


def decoupled_energy(grid: Grid, phi, p: PhysParams) -> float:
    """Free energy sum(A psi(phi) + B/2 |grad phi|^2) of the isolated phase field."""
    g = gradient_cc(grid, phi)
    return float(np.sum(p.A * psi_value(phi, p)) * grid.cell_area + 0.5 * p.B * vector_inner(grid, g, g))
