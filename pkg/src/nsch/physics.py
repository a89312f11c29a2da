"""Model constants, Flory-Huggins potential, viscosity law and chemical potential."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, PotentialDomainError
from .grid import Grid
from .operators import laplacian_neumann

OVERFLOW_GUARD = 1.0 - 1e-14


@dataclass(frozen=True)
class PhysParams:
    A: float = 1.0
    B: float = 1.0
    chi: float = 0.5
    alpha: float = 0.5
    c0: float = 0.0
    theta: float = 1.0
    theta0: float = 2.0
    eta1: float = 1.0
    eta2: float = 2.0
    m1: float = 0.5
    m2: float = 10.0

    def violations(self) -> list[str]:
        """Human-readable list of violated hypotheses; empty when admissible."""
        out = []
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                out.append(f"{f.name} must be finite")
        if not self.eta1 > 0:
            out.append("H1: eta1 must be > 0")
        if not self.eta2 > 0:
            out.append("H1: eta2 must be > 0")
        if not self.theta > 0:
            out.append("H2: theta must be > 0")
        if not self.theta0 > self.theta:
            out.append("H2: theta0 must be > theta")
        if not self.A > 0:
            out.append("H4: A must be > 0")
        if not self.B > 0:
            out.append("H4: B must be > 0")
        if not self.alpha >= 0:
            out.append("H4: alpha must be >= 0")
        if not -1 < self.c0 < 1:
            out.append("H4: c0 must lie in (-1, 1)")
        if not 0 <= self.m1 < 1:
            out.append("phase space: m1 must lie in [0, 1)")
        if not self.m2 >= 0:
            out.append("phase space: m2 must be >= 0")
        if not abs(self.c0) <= self.m1:
            out.append("phase space: c0 must lie in [-m1, m1]")
        return out

    def validate(self) -> "PhysParams":
        bad = self.violations()
        if bad:
            raise ConfigError("; ".join(bad))
        return self

    def replace(self, **changes) -> "PhysParams":
        d = asdict(self)
        d.update(changes)
        return PhysParams(**d)

    @property
    def eta_min(self) -> float:
        return min(self.eta1, self.eta2)

    @property
    def eta_max(self) -> float:
        return max(self.eta1, self.eta2)


@dataclass(frozen=True)
class PotentialEval:
    value: float
    first: float
    second: float
    third: float


def _check_domain(r):
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    if np.any(~np.isfinite(r)) or np.any(a >= 1.0):
        raise PotentialDomainError("Flory-Huggins potential needs |r| < 1")
    if np.any(a > OVERFLOW_GUARD):
        raise PotentialDomainError("|r| exceeds 1 - 1e-14; logarithms would overflow")
    return r


def psi_value(r, p: PhysParams):
    r = _check_domain(r)
    return 0.5 * p.theta * ((1 - r) * np.log1p(-r) + (1 + r) * np.log1p(r)) + 0.5 * p.theta0 * (1 - r * r)


def psi0_prime(r, p: PhysParams):
    """Derivative of the convex (logarithmic) part, theta * artanh(r)."""
    return p.theta * np.arctanh(_check_domain(r))


def psi_prime(r, p: PhysParams):
    r = _check_domain(r)
    return p.theta * np.arctanh(r) - p.theta0 * r


def psi0_second(r, p: PhysParams):
    r = _check_domain(r)
    return p.theta / ((1 - r) * (1 + r))


def psi0_third(r, p: PhysParams):
    r = _check_domain(r)
    return 2 * p.theta * r / ((1 - r) * (1 + r)) ** 2


def psi(r: float, p: PhysParams) -> PotentialEval:
    """Potential value, its derivative, and the 2nd/3rd derivatives of the convex part."""
    return PotentialEval(
        value=float(psi_value(r, p)),
        first=float(psi_prime(r, p)),
        second=float(psi0_second(r, p)),
        third=float(psi0_third(r, p)),
    )


def eta(r, p: PhysParams):
    """Linear viscosity law; arguments are clamped to [-1, 1] first.

    Written as ``eta2 + (eta1 - eta2)(1 + r)/2`` so equal endpoint
    viscosities give exactly that constant.
    """
    rc = np.clip(r, -1.0, 1.0)
    return p.eta2 + (p.eta1 - p.eta2) * 0.5 * (1.0 + rc)


def chemical_potential(grid: Grid, phi, sigma, p: PhysParams) -> np.ndarray:
    phi = grid.check_scalar(phi, "phi")
    sigma = grid.check_scalar(sigma, "sigma")
    return p.A * psi_prime(phi, p) - p.B * laplacian_neumann(grid, phi) - p.chi * sigma


@dataclass(frozen=True)
class HypothesisReport:
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    h4_ok: bool
    eta_star: float
    eta_star_upper: float
    worst_h3_margin: float
    h3_constant: float
    eps0: float
    n_samples: int


def _chebyshev_samples(n):
    k = np.arange(n)
    return np.cos(np.pi * (k + 0.5) / n)[::-1]


def verify_hypotheses(p: PhysParams, n_samples: int = 2000, eps0: float = 0.1) -> HypothesisReport:
    """Sampled check of H1-H4 on Chebyshev nodes of (-1, 1).

    Sampling clusters at the barriers, reaching ``1 - r ~ (pi/2n)^2``.
    For H3 the smallest constant C with ``psi0''(z) <= C exp(C |psi0'(z)|)``
    at every node is found by bisection; the margin reported is
    ``min(C exp(C|psi0'|) - psi0'')`` for that C (ideally >= 0).
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    r = _chebyshev_samples(n_samples)
    r = r[np.abs(r) <= OVERFLOW_GUARD]

    etas = eta(np.concatenate([r, [-1.0, 1.0]]), p)
    eta_lo, eta_hi = float(etas.min()), float(etas.max())
    h1 = bool(p.eta1 > 0 and p.eta2 > 0 and eta_lo > 0)

    h2 = False
    h3 = False
    margin = -np.inf
    c_fit = np.nan
    if p.theta > 0:
        d2 = psi0_second(r, p)
        d1 = np.abs(psi0_prime(r, p))
        near_right = r >= 1 - eps0
        near_left = r <= -1 + eps0
        mono = np.all(np.diff(d2[near_right]) >= 0) and np.all(np.diff(d2[near_left]) <= 0)
        blowup = psi0_prime(OVERFLOW_GUARD, p) > 10 * p.theta and psi0_prime(-OVERFLOW_GUARD, p) < -10 * p.theta
        h2 = bool(np.all(d2 >= p.theta * (1 - 1e-12)) and p.theta0 - p.theta > 0 and mono and blowup)

        def ok(c):
            return np.all(d2 <= c * np.exp(c * d1))

        lo, hi = 1e-6, 1.0
        while not ok(hi) and hi < 1e6:
            hi *= 2
        if ok(hi):
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                lo, hi = (lo, mid) if ok(mid) else (mid, hi)
            c_fit = hi
            margin = float(np.min(c_fit * np.exp(c_fit * d1) - d2))
            h3 = True

    h4 = bool(p.A > 0 and p.B > 0 and np.isfinite(p.chi) and p.alpha >= 0 and -1 < p.c0 < 1)
    return HypothesisReport(h1, h2, h3, h4, eta_lo, eta_hi, margin, float(c_fit), eps0, len(r))
