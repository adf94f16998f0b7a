import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slesigma.model import DrivingPath, sample_driving_path, validate_sigma, zero_path
from slesigma.point_tracker import (PointTrajectory, angular_coefficients, evolve_point,
                                    polar_evolve, polar_step, sigma_time)

from strategies import specs


def test_angular_coefficients_plug_in():
    co = angular_coefficients(validate_sigma(2, 1, 0), 0.0)
    assert co.mu == 0.0
    assert co.nu == pytest.approx(1.5, abs=1e-15)
    assert co.D == pytest.approx(0.5, abs=1e-15)


def test_degenerate_D_vanishes_at_singular_angle():
    co = angular_coefficients(validate_sigma(4, 1, 2), math.atan(0.5))
    assert abs(co.D) < 1e-15


@given(specs(), st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_coefficients_pi_periodic_and_D_nonnegative(s, us):
    u = np.array(us)
    a = angular_coefficients(s, u)
    b = angular_coefficients(s, u + math.pi)
    scale = 1 + abs(s.a) + abs(s.b) + abs(s.c)
    np.testing.assert_allclose(a.mu, b.mu, atol=1e-13 * scale)
    np.testing.assert_allclose(a.nu, b.nu, atol=1e-13 * scale)
    np.testing.assert_allclose(a.D, b.D, atol=1e-13 * scale)
    assert np.all(a.D >= -1e-12 * scale)


def test_periodicity_on_many_angles(rng):
    s = validate_sigma(3, 2, -1)
    u = rng.uniform(-10, 10, 1000)
    a, b = angular_coefficients(s, u), angular_coefficients(s, u + math.pi)
    np.testing.assert_allclose(a.mu, b.mu, atol=1e-15 * 8)
    np.testing.assert_allclose(a.D, b.D, atol=1e-15 * 8)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.lists(st.floats(-7, 7), min_size=1, max_size=20))
def test_degenerate_diffusion_is_a_square(a, b, us):
    u = np.array(us)
    s = validate_sigma(a, b, math.sqrt(a * b))
    D = angular_coefficients(s, u).D
    sq = (math.sqrt(a) * np.sin(u) - math.sqrt(b) * np.cos(u)) ** 2
    np.testing.assert_allclose(2 * D, sq, atol=1e-14 * (1 + a + b))


def test_evolve_zero_path_closed_form():
    tr = evolve_point(zero_path(10, 1.0), 3.0)
    assert tr.samples[0] == (0.0, 3 + 0j)
    assert tr.t[-1] == pytest.approx(1.0, abs=1e-12)
    assert abs(tr.f[-1] - math.sqrt(13)) < 1e-6
    assert not tr.absorbed and tr.T_z is None


def test_evolve_absorption_time():
    tr = evolve_point(zero_path(100, 2.0), 1j)
    assert tr.absorbed
    lo, hi = tr.T_z
    assert lo <= hi and abs(hi - 0.25) < 1e-2
    assert abs(tr.f[-1]) <= tr.delta_swallow


def test_evolve_rejects_origin():
    with pytest.raises(ValueError):
        evolve_point(zero_path(10, 1.0), 0.0)


def _envelope_violation(tr, sigma_path):
    """Largest excess over the bounds among consecutive samples while |f| >= 1."""
    mod = np.abs(tr.f)
    below = np.nonzero(mod < 1)[0]
    end = below[0] if below.size else mod.size - 1
    t = tr.t[: end + 1]
    G = tr.f[: end + 1] + tr.driver[: end + 1]
    dt = np.diff(t)
    worst = 0.0
    for part in (G.real, G.imag):
        d = np.diff(part)
        span = np.abs(part[:, None] - part[None, :]).max() if part.size < 2000 else np.ptp(part)
        tol = 1e-8 * (1 + span)
        worst = max(worst, np.max(np.abs(d) - 2 * dt - tol, initial=-np.inf))
    return worst


def test_envelope_bounds_one_path():
    p = sample_driving_path(validate_sigma(2, 1, 0.5), 200, 0.5, seed=1)
    tr = evolve_point(p, 1.5 + 0.5j)
    assert _envelope_violation(tr, p) <= 0


def test_driver_recorded_along_trajectory():
    p = sample_driving_path(validate_sigma(1, 1, 0), 50, 0.5, seed=2)
    tr = evolve_point(p, 5.0)
    assert tr.driver[-1] == pytest.approx(p.cumulative[-1], abs=1e-12)


def test_sigma_time_zero_path():
    tr = evolve_point(zero_path(100, 2.0), 1.0)
    m = sigma_time(tr)
    np.testing.assert_allclose(m.sigma, 0.25 * np.log1p(4 * m.t), atol=1e-4)
    assert np.all(np.diff(m.sigma) > 0) and np.all(np.diff(m.t) > 0)
    s = m.sigma_time(1.0)
    assert m.capacity_time(s) == pytest.approx(1.0, abs=1e-9)


def test_sigma_time_unit_modulus():
    t = np.linspace(0, 3, 31)
    tr = PointTrajectory(1.0, t, np.exp(1j * t), np.zeros(t.size), False, None, 1e-4)
    np.testing.assert_allclose(sigma_time(tr).sigma, t, atol=1e-14)


def test_sigma_time_monotone_random(rng):
    for k in range(1000):
        t = np.cumsum(rng.uniform(1e-3, 1, 20))
        f = rng.normal(size=20) + 1j * rng.normal(size=20)
        tr = PointTrajectory(f[0], t, f, np.zeros(20), False, None, 1e-4)
        assert np.all(np.diff(sigma_time(tr).sigma) > 0)


def test_polar_deterministic_case():
    tr = polar_evolve(validate_sigma(0, 0, 0), 0.0, 1.0, 1e-3, seed=0)
    assert not np.any(tr.theta)
    # nu(0) = 2, log|f(1)| = 2 sigma-time for the zero driver
    np.testing.assert_allclose(tr.logmod, 2 * tr.times, rtol=1e-12, atol=0)
    t_cap = (np.exp(4 * tr.times) - 1) / 4
    np.testing.assert_allclose(tr.logmod, np.log(np.sqrt(1 + 4 * t_cap)), rtol=1e-12, atol=1e-15)


def test_polar_shared_noise_reconstruction():
    s = validate_sigma(2, 1, 0.5)
    tr = polar_evolve(s, np.array([0.3, 1.2]), 0.2, 1e-3, seed=4)
    th = tr.theta[:-1]
    co = angular_coefficients(s, th)
    m_th = np.diff(tr.theta, axis=0) - co.mu * tr.h
    m_lm = np.diff(tr.logmod, axis=0) - co.nu * tr.h
    sn, cs = np.sin(th), np.cos(th)
    # [m_th, m_lm] = [[-s, c], [c, s]] [X, Y]
    X = -sn * m_th + cs * m_lm
    Y = cs * m_th + sn * m_lm
    np.testing.assert_allclose(X, tr.X, atol=1e-12)
    np.testing.assert_allclose(Y, tr.Y, atol=1e-12)


def test_logderiv_has_no_quadratic_variation():
    s = validate_sigma(2, 1, 0.5)
    for h in (1e-3, 2.5e-4):
        tr = polar_evolve(s, 0.4, 0.5, h, seed=1)
        ld = tr.logderiv
        expect = ld[:-1] - 2 * np.cos(2 * tr.theta[:-1]) * h
        np.testing.assert_allclose(ld[1:], expect, atol=1e-14)
        # |d logderiv| <= 2h per step, so its increment variance is O(h^2),
        # while the angle carries O(h) noise
        assert np.var(np.diff(ld)) <= 4 * h * h
        assert np.var(np.diff(tr.theta)) > 0.1 * h


def test_theta_quadratic_variation():
    s = validate_sigma(2, 1, 0.5)
    N, h = 400, 1e-3
    tr = polar_evolve(s, np.full(N, 0.7), 1.0, h, seed=2)
    qv = np.sum(np.diff(tr.theta, axis=0) ** 2, axis=0)
    target = np.sum(2 * angular_coefficients(s, tr.theta[:-1]).D * h, axis=0)
    ratio = qv / target
    assert abs(ratio.mean() - 1) < 4 * ratio.std() / math.sqrt(N) + 0.01


def test_theta_continuity():
    tr = polar_evolve(validate_sigma(3, 1, 0.5), 0.0, 2.0, 1e-3, seed=3)
    assert np.max(np.abs(np.diff(tr.theta))) < 10 * math.sqrt(1e-3) * math.sqrt(3)


def test_polar_step_matches_evolve():
    s = validate_sigma(2, 1, 0.5)
    tr = polar_evolve(s, 0.2, 0.01, 1e-3, seed=0)
    th, lm, ld = 0.2, 0.0, 0.0
    for k in range(tr.X.shape[0]):
        th, lm, ld = polar_step(s, th, lm, ld, 1e-3, tr.X[k], tr.Y[k])
    assert th == tr.theta[-1] and lm == tr.logmod[-1] and ld == tr.logderiv[-1]


def test_checkpoints_and_determinism():
    s = validate_sigma(1, 2, 0.1)
    a = polar_evolve(s, np.zeros(5), 2.0, 1e-2, seed=9, checkpoints=[1.0, 2.0])
    b = polar_evolve(s, np.zeros(5), 2.0, 1e-2, seed=9)
    np.testing.assert_allclose(a.times, [1.0, 2.0])
    np.testing.assert_array_equal(a.theta[0], b.theta[100])
    np.testing.assert_array_equal(a.theta[1], b.theta[200])
    with pytest.raises(ValueError):
        polar_evolve(s, 0.0, 1.0, 0.0, seed=0)


def test_trajectory_csv(tmp_path):
    tr = polar_evolve(validate_sigma(1, 1, 0), 0.1, 0.05, 1e-2, seed=0)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "sigma_time,theta,logmod,logderiv"
    assert len(lines) == 1 + tr.times.size
    row = [float(v) for v in lines[-1].split(",")]
    assert row[1] == tr.theta[-1]
