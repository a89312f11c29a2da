import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_velocity, smooth_phi
from nsch.cahn_hilliard import CHStepConfig
from nsch.diagnostics import (
    absorbing_entry_time, fit_exponential_attraction, hausdorff_semidist, integrate, phase_distance,
    phase_norm, separation_gap, smooth_bump, smoothing_ratio, sobolev2_norm, weak_distance,
    z_integrand,
)
from nsch.errors import ContractError
from nsch.grid import Grid
from nsch.initial import spinodal_phi, streamfunction_velocity
from nsch.operators import gradient_cc, mean
from nsch.physics import PhysParams

P = PhysParams()


def random_state(g, seed, t=0.0):
    r = np.random.default_rng(seed)
    phi = np.clip(0.5 * r.uniform(-1, 1, g.shape), -0.9, 0.9)
    return _state(g, phi, r.standard_normal(g.shape), random_velocity(g, r, 0.3), t)


def _state(g, phi, sigma, v=None, t=0.0):
    from nsch.stepper import make_state
    return make_state(g, phi, sigma, P, v, t)


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_phase_distance_is_a_metric(a, b, c):
    g = Grid(8, 8)
    x, y, z = random_state(g, a), random_state(g, b), random_state(g, c)
    dxy = phase_distance(x, y).d
    assert phase_distance(x, x).d == 0.0
    assert dxy == phase_distance(y, x).d
    assert dxy <= phase_distance(x, z).d + phase_distance(z, y).d + 1e-12
    if a != b:
        assert dxy > 0


def test_phase_distance_grid_mismatch():
    with pytest.raises(ContractError, match="grids"):
        phase_distance(random_state(Grid(8, 8), 0), random_state(Grid(8, 10), 0))


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_weak_distance_properties(a, b):
    g = Grid(8, 8)
    x, y = random_state(g, a), random_state(g, b)
    w = weak_distance(x, y)
    assert w.W == pytest.approx(weak_distance(y, x).W, rel=1e-10)
    assert all(c >= 0 for c in w.components)
    assert w.components[3] == pytest.approx(abs(mean(g, x.phi) - mean(g, y.phi)), abs=1e-15)
    assert weak_distance(x, x).W == 0.0
    # weak norms are dominated by the strong ones
    d = phase_distance(x, y).d
    assert w.W <= 0.5 * d**2 + w.components[3] + 1e-12


def test_weak_distance_quadratic_scaling():
    g = Grid(16, 16)
    x = random_state(g, 1)
    dphi = smooth_bump(g) * 1e-2
    y = _state(g, x.phi + dphi, x.sigma, x.v)
    z = _state(g, x.phi + 2 * dphi, x.sigma, x.v)
    assert weak_distance(x, z).W == pytest.approx(4 * weak_distance(x, y).W, rel=1e-10)


def test_weak_distance_ignores_gradient_velocity(rng):
    g = Grid(12, 12)
    x = random_state(g, 4)
    y = _state(g, x.phi, x.sigma, x.v + gradient_cc(g, rng.standard_normal(g.shape)).with_zero_boundary())
    assert weak_distance(x, y).components[0] < 1e-25


def test_z_integrand_of_rest_state():
    g = Grid(8, 8)
    s = _state(g, np.zeros(g.shape), np.zeros(g.shape))
    assert z_integrand(s, P) == 1.0


def test_w23_norm_converges_to_quadrature():
    f = lambda x: 0.5 * mpmath.cos(mpmath.pi * x)  # noqa: E731
    exact = mpmath.quad(lambda x: abs(f(x)) ** 3 + abs(mpmath.diff(f, x)) ** 3
                        + abs(mpmath.diff(f, x, 2)) ** 3, [0, 0.5, 1]) ** (mpmath.mpf(1) / 3)
    errs = []
    for n in (64, 128):
        g = Grid(n, n)
        x, _ = g.meshgrid()
        errs.append(abs(sobolev2_norm(g, 0.5 * np.cos(np.pi * x), 3.0) - float(exact)))
    assert errs[1] < 2e-3 * float(exact)
    assert errs[0] / errs[1] > 1.8


def test_h2_norm_of_mixed_mode():
    g = Grid(64, 64)
    f = smooth_phi(g, 1.0, 1, 1)
    k2 = np.pi**2
    # |f|^2 + |grad f|^2 + |D^2 f|^2 with |D^2 f|^2 = 4 k2^2 / 4 in the mean
    exact = np.sqrt(0.25 + 0.25 * 2 * k2 + 0.25 * 4 * k2**2)
    assert sobolev2_norm(g, f) == pytest.approx(exact, rel=2e-3)


def test_z_integrand_grows_with_velocity():
    g = Grid(16, 16)
    phi = smooth_phi(g, 0.3, 1, 1)
    z = [z_integrand(_state(g, phi, np.ones(g.shape), streamfunction_velocity(g, a)), P) for a in (0, 0.5, 1)]
    assert z[0] < z[1] < z[2]


def test_separation_gap():
    g = Grid(8, 8)
    a = _state(g, np.full(g.shape, 0.5), np.zeros(g.shape), t=0.0)
    b = _state(g, np.full(g.shape, -0.9), np.zeros(g.shape), t=1.0)
    assert separation_gap([a, b], 0.0) == pytest.approx(0.1)
    assert separation_gap([a, b], 0.5) == pytest.approx(0.1)
    assert separation_gap([a], 0.0) == 0.5
    with pytest.raises(ContractError):
        separation_gap([a], 2.0)


@settings(max_examples=20)
@given(st.lists(st.floats(-0.99, 0.99), min_size=2, max_size=8), st.data())
def test_separation_gap_of_subsample_not_smaller(vals, data):
    g = Grid(4, 4)
    traj = [_state(g, np.full(g.shape, v), np.zeros(g.shape), t=float(k)) for k, v in enumerate(vals)]
    idx = data.draw(st.lists(st.integers(0, len(vals) - 1), min_size=1, unique=True))
    sub = [traj[i] for i in sorted(idx)]
    assert separation_gap(sub, 0.0) >= separation_gap(traj, 0.0)


def test_hausdorff_semidistance():
    g = Grid(8, 8)
    a, b, c = random_state(g, 1), random_state(g, 2), random_state(g, 3)
    assert hausdorff_semidist([a, b], [a, b, c]) == 0.0
    assert hausdorff_semidist([a], [b]) == phase_distance(a, b).d
    assert hausdorff_semidist([a, b, c], [a]) > 0.0
    assert hausdorff_semidist([a], [a, b]) == 0.0
    with pytest.raises(ContractError):
        hausdorff_semidist([], [a])


def test_fit_exact_exponential():
    t = np.linspace(0, 5, 20)
    f = fit_exponential_attraction(t, 2.5 * np.exp(-1.3 * t))
    assert f.J == pytest.approx(2.5, rel=1e-10) and f.omega == pytest.approx(1.3, rel=1e-10)
    assert f.rms_log_residual < 1e-10 and f.n_points == 20


def test_fit_censors_round_off():
    t = np.arange(10.0)
    d = np.exp(-t)
    d[6:] = 0.0
    assert fit_exponential_attraction(t, d).n_points == 6
    with pytest.raises(ContractError, match="floor"):
        fit_exponential_attraction(t, np.where(t < 3, 1.0, 0.0))
    with pytest.raises(ContractError):
        fit_exponential_attraction(t, -d)


def test_fit_recovers_oono_rate():
    g = Grid(16, 16)
    p = PhysParams(alpha=0.8, c0=0.0, B=0.02)
    tau = 1e-2
    s = _state(g, spinodal_phi(g, 0.3, 0.05, 0), np.zeros(g.shape))
    traj = integrate(s, 2.0, p, CHStepConfig(tau), every=10)
    t = np.array([x.t for x in traj])
    d = np.array([abs(mean(g, x.phi)) for x in traj])
    assert fit_exponential_attraction(t, d).omega == pytest.approx(0.8, rel=0.05)


def test_absorbing_entry_time():
    t = np.arange(6.0)
    assert absorbing_entry_time(t, [5, 4, 3, 0.5, 0.2, 0.1], 1.0) == 3.0
    assert absorbing_entry_time(t, [5, 0.5, 3, 0.5, 0.2, 0.1], 1.0) == 3.0
    assert absorbing_entry_time(t, np.zeros(6), 1.0) == 0.0
    assert absorbing_entry_time(t, [5, 4, 3, 2, 2, 2], 1.0) is None


def test_smoothing_ratio_degenerate_and_bounds():
    g = Grid(8, 8)
    s = _state(g, np.zeros(g.shape), np.zeros(g.shape))
    cfg = CHStepConfig(1e-2)
    with pytest.raises(ContractError, match="degenerate"):
        smoothing_ratio(s, 0.0, 0.1, P, cfg)
    with pytest.raises(ContractError):
        smoothing_ratio(s, 0.1, 0.1, P, cfg)


def test_smoothing_ratio_stable_in_size():
    g = Grid(16, 16)
    p = PhysParams(B=0.2)
    s = _state(g, spinodal_phi(g, 0.0, 0.3, 3), np.zeros(g.shape), streamfunction_velocity(g, 0.05))
    cfg = CHStepConfig(1e-2)
    r1 = smoothing_ratio(s, 1e-3, 0.2, p, cfg)
    r2 = smoothing_ratio(s, 5e-4, 0.2, p, cfg)
    assert np.isfinite(r1) and r1 > 0
    assert abs(r1 - r2) < 1e-3 * r1


def test_phase_norm_of_zero():
    g = Grid(8, 8)
    assert phase_norm(_state(g, np.zeros(g.shape), np.zeros(g.shape))) == 0.0
