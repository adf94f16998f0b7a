import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from strategies import specs

from slesigma.model import validate_sigma
from slesigma.point_tracker import angular_coefficients
from slesigma.stationary import (DensityError, degenerate_endpoint_limit, density_c0, density_degenerate,
                                 density_general, exact_density, fokker_planck_oracle, l1_distance,
                                 mu_over_D_integral, mu_over_D_quadrature, stationary_density)


def spectral_residual(dens):
    """sup |-(mu p)' + (D p)''| with Fourier derivatives on the periodic grid."""
    u = dens.grid[:-1]
    p = dens.values[:-1]
    co = angular_coefficients(dens.sigma, u)
    k = np.fft.fftfreq(u.size, d=1.0 / u.size)

    def deriv(f, order):
        return np.real(np.fft.ifft((1j * k) ** order * np.fft.fft(f)))

    return np.abs(-deriv(co.mu * p, 1) + deriv(co.D * p, 2)).max()


def check_invariants(dens):
    p = dens.values
    M = dens.M
    assert np.all(p >= 0)
    assert dens.integrate() == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(p[: M // 2 + 1], p[M // 2:], atol=1e-8)


def test_c0_ratio_a_equals_b():
    d = density_c0(validate_sigma(4, 4, 0))
    assert d(0.0) / d(math.pi / 2) == pytest.approx(math.e, rel=1e-10)
    assert d.values[0] / d.values[d.M // 4] == pytest.approx(math.e, rel=1e-10)
    assert d.r_star == 0.0


def test_c0_inverse_D_case():
    s = validate_sigma(5, 1, 0)
    d = stationary_density(s)
    inv = 1.0 / angular_coefficients(s, d.grid).D
    ref = inv / (np.sum(inv[:-1]) * (d.grid[1] - d.grid[0]))
    np.testing.assert_allclose(d.values, ref, rtol=1e-8)
    assert d.method == "c0_closed_form" and d.r_star == 0.0


@pytest.mark.parametrize("s", [(2, 1, 0), (1, 3, 0), (4, 4, 0), (9, 1, 0)])
def test_r_star_zero_for_c0(s):
    assert stationary_density(validate_sigma(*s)).r_star == 0.0


def test_general_ode_residual():
    d = density_general(validate_sigma(2, 1, 0.5))
    assert spectral_residual(d) < 1e-6


def test_reflection():
    pos = stationary_density(validate_sigma(2, 1, 0.5))
    neg = stationary_density(validate_sigma(2, 1, -0.5))
    assert neg.method == "reflected"
    np.testing.assert_allclose(neg.values, pos.values[::-1], rtol=0, atol=1e-12)
    u = np.linspace(0.1, 6, 13)
    np.testing.assert_allclose(neg(u), pos(-u), atol=1e-12)


@pytest.mark.parametrize("s", [(2, 1, 0.5), (1, 1, 0.9), (3, 1, 1.5), (0.5, 6, 1.0), (1, 4, 1.99)])
def test_r_star_nonnegative(s):
    assert stationary_density(validate_sigma(*s)).r_star >= 0


def test_degenerate_endpoint_value():
    s = validate_sigma(1, 1, 1)
    assert degenerate_endpoint_limit(s) == 0.5
    d = density_degenerate(s)
    assert d.endpoint_value * d.normalizer == pytest.approx(0.5, rel=1e-14)
    assert exact_density(s, math.pi / 4) == pytest.approx(0.5, rel=1e-14)
    # the closed formula tends to the same value from both sides
    x = d.singular_point
    near = exact_density(s, np.array([x + 1e-6, x + math.pi - 1e-6]))
    np.testing.assert_allclose(near, 0.5, rtol=1e-9)


@pytest.mark.parametrize("s", [(1, 1, 1), (4, 1, 2), (1, 3, -math.sqrt(3))])
def test_degenerate_Dp_is_C1_at_singular_point(s):
    sig = validate_sigma(*s)
    d = stationary_density(sig)
    x = d.singular_point

    def Dp(u):
        return angular_coefficients(sig, u).D * exact_density(sig, u)

    h = 1e-5
    right = (Dp(x + h) - Dp(x)) / h
    left = (Dp(x) - Dp(x - h)) / h
    assert abs(right - left) < 1e-4
    assert abs(right) < 1e-4


@pytest.mark.parametrize("s", [(1, 1, 1), (4, 1, 2)])
def test_degenerate_first_order_ode(s):
    sig = validate_sigma(*s)
    x = stationary_density(sig, 256).singular_point
    u = x + np.linspace(0.02, math.pi - 0.02, 60)
    h = 1e-5

    def Dp(w):
        return angular_coefficients(sig, w).D * exact_density(sig, w)

    r = -angular_coefficients(sig, u).mu * exact_density(sig, u) + (Dp(u + h) - Dp(u - h)) / (2 * h)
    assert np.ptp(r) < 1e-6 * np.abs(r).max()
    assert r.mean() == pytest.approx(1.0, rel=1e-6)


def test_degenerate_grid_matches_exact_formula():
    s = validate_sigma(4, 1, 2)
    d = stationary_density(s, 512)
    raw = exact_density(s, d.grid)
    np.testing.assert_allclose(d.values, raw / d.normalizer, rtol=1e-9)


def test_mu_over_D_examples():
    assert mu_over_D_integral(validate_sigma(3, 1, 0)) == 0.0
    s = validate_sigma(1, 1, 0.5)
    closed = mu_over_D_integral(s)
    assert closed == pytest.approx(8 * math.pi * 0.5 * (math.sqrt(3) - 2) / (math.sqrt(3) / 2), rel=1e-14)
    assert closed == pytest.approx(-3.888, abs=1e-3)
    co = lambda u: angular_coefficients(s, u)
    ref, _ = quad(lambda u: co(u).mu / co(u).D, 0, math.pi, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert closed == pytest.approx(ref, rel=1e-10)
    assert mu_over_D_quadrature(s) == pytest.approx(closed, rel=1e-10)


@given(specs(min_ab=0.05))
def test_mu_over_D_sign_and_quadrature(s):
    if s.a * s.b - s.c ** 2 <= 1e-3 * s.a * s.b or (s.a - s.b) ** 2 + 4 * s.c ** 2 < 1e-6:
        return
    closed = mu_over_D_integral(s)
    assert mu_over_D_quadrature(s) == pytest.approx(closed, rel=1e-8, abs=1e-12)
    if s.c >= 0:
        assert closed <= 1e-12


@settings(max_examples=25)
@given(specs(min_ab=0.1, max_ab=10))
def test_density_invariants(s):
    d = stationary_density(s, 256)
    check_invariants(d)


@settings(max_examples=10)
@given(specs(degenerate=True, min_ab=0.1, max_ab=10))
def test_degenerate_invariants(s):
    d = stationary_density(s, 256)
    check_invariants(d)
    assert d.method in ("degenerate", "reflected")


def test_c_to_zero_limit():
    base = stationary_density(validate_sigma(2, 1, 0))
    near = stationary_density(validate_sigma(2, 1, 1e-4))
    h = base.grid[1] - base.grid[0]
    assert np.sum(np.abs(near.values - base.values)[:-1]) * h < 1e-4


def test_refusals():
    with pytest.raises(DensityError):
        stationary_density(validate_sigma(0, 0, 0))
    with pytest.raises(DensityError):
        stationary_density(validate_sigma(0, 2, 0))
    with pytest.raises(DensityError):
        stationary_density(validate_sigma(3, 0, 0))
    with pytest.raises(DensityError):
        density_general(validate_sigma(2, 1, 0))
    with pytest.raises(DensityError):
        density_c0(validate_sigma(2, 1, 0.5))
    with pytest.raises(ValueError):
        stationary_density(validate_sigma(2, 1, 0), 7)


def test_oracle_explicit_matches_direct_and_conserves_mass():
    s = validate_sigma(2, 1, 0.5)
    ex = fokker_planck_oracle(s, 64, method="explicit")
    di = fokker_planck_oracle(s, 64, method="direct")
    assert ex.mass_drift < 1e-12
    np.testing.assert_allclose(ex.values, di.values, atol=1e-8)
    u, v = ex.full_period()
    assert np.sum(v) * (u[1] - u[0]) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("s", [(5, 1, 0), (4, 4, 0)])
def test_oracle_closed_forms(s):
    sig = validate_sigma(*s)
    o = fokker_planck_oracle(sig, 1024, method="direct")
    assert l1_distance(stationary_density(sig), o) < 1e-3


def test_oracle_grid_checks():
    with pytest.raises(ValueError):
        fokker_planck_oracle(validate_sigma(1, 1, 0), 100)


def test_interpolation_and_sampling(rng):
    d = stationary_density(validate_sigma(2, 1, 0.5))
    np.testing.assert_allclose(d(d.grid), d.values, atol=1e-12)
    x = d.sample(20_000, rng)
    assert x.min() >= 0 and x.max() < math.pi
    u, cdf = d.cdf_half()
    emp = np.searchsorted(np.sort(x), u) / x.size
    assert np.max(np.abs(emp - cdf)) < 0.02


def test_density_csv(tmp_path):
    d = stationary_density(validate_sigma(2, 1, 0.5), 64)
    d.to_csv(tmp_path / "d.csv", "# x\n")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[1] == "u,p" and len(lines) == 2 + 65
    assert float(lines[2].split(",")[1]) == d.values[0]
