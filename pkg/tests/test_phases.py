import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slesigma.model import validate_sigma
from slesigma.phases import (LABELS, PhaseConsistencyError, c0_rule, classify, find_root_a,
                             phase_integrals, phase_scan, sign_table)
from slesigma.point_tracker import angular_coefficients


def test_exact_cancellations():
    assert abs(phase_integrals(validate_sigma(5, 1, 0)).I) < 1e-9
    assert abs(phase_integrals(validate_sigma(9, 1, 0)).II) < 1e-9


def test_thin_example_positive_integrals():
    pi = phase_integrals(validate_sigma(2, 2, 0))
    assert pi.I > 0 and pi.II > 0


def test_integrals_against_direct_quadrature():
    s = validate_sigma(2, 1, 0.5)
    pi = phase_integrals(s)
    d = pi.density
    nu = angular_coefficients(s, d.grid).nu
    I = d.integrate(lambda u: angular_coefficients(s, u).nu)
    II = d.integrate(lambda u: angular_coefficients(s, u).nu + 2 * np.cos(2 * u))
    assert pi.I == pytest.approx(I, abs=1e-12)
    assert pi.II == pytest.approx(II, abs=1e-12)
    assert np.isfinite(nu).all()


@pytest.mark.parametrize("s, label", [((2, 2, 0), "thin"), ((7, 1, 0), "swallowing"),
                                      ((9, 1, 0), "hitting"), ((12, 1, 0), "hitting"),
                                      ((5, 1, 0), "thin")])
def test_classify_examples(s, label):
    rep = classify(validate_sigma(*s))
    assert rep.label == label
    assert rep.c0_exact == label


def test_c0_rule_boundaries():
    assert c0_rule(5, 1) == "thin"
    assert c0_rule(5.5, 1) == "swallowing"
    assert c0_rule(9, 1) == "hitting"


@given(st.floats(-10, 10), st.floats(-10, 10), st.sampled_from([0.0, 0.3]))
def test_sign_table_total(I, II, c):
    tol = 1e-9
    label = sign_table(I, II, c, tol, tol)
    assert label in LABELS
    if abs(II) >= tol:
        expect = {(True, True): "thin", (False, True): "swallowing",
                  (True, False): "dense", (False, False): "hitting"}
        assert label == expect[(I >= 0 or abs(I) < tol, II > 0)]
    elif c == 0:
        assert label == "hitting"
    else:
        assert label == "boundary_indeterminate"


def test_c0_consistency_random(rng):
    a = rng.uniform(0.05, 14, 200)
    b = rng.uniform(0.05, 6, 200)
    for ai, bi in zip(a, b):
        rep = classify(validate_sigma(ai, bi, 0), grid=512)
        assert rep.label == c0_rule(ai, bi)


@settings(max_examples=20)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.05, 0.95))
def test_conjugation_invariance(a, b, frac):
    c = frac * math.sqrt(a * b)
    p = classify(validate_sigma(a, b, c), grid=256)
    m = classify(validate_sigma(a, b, -c), grid=256)
    assert p.label == m.label
    assert p.I == m.I and p.II == m.II


def test_boundary_indeterminate_with_forced_tolerance():
    rep = classify(validate_sigma(2, 1, 0.5), tol_zero=1e3)
    assert rep.label == "boundary_indeterminate"
    assert rep.boundary_flags["II"]


def test_a_or_b_zero_uses_classical_rule():
    rep = classify(validate_sigma(6, 0, 0))
    assert rep.label == "swallowing" and rep.I is None
    assert classify(validate_sigma(0, 3, 0)).label == "thin"


def test_consistency_error_type():
    assert issubclass(PhaseConsistencyError, AssertionError)


def test_bisection_roots():
    assert find_root_a("I", 1.0, 0.0, 3.0, 6.0) == pytest.approx(5.0, abs=0.02)
    assert find_root_a("II", 1.0, 0.0, 8.0, 10.0) == pytest.approx(9.0, abs=0.02)


def test_scan_small_grid():
    scan = phase_scan((0, 12), (0, 3), 0.0, 1.0)
    assert scan.labels.shape == (4, 13)
    rows = {tuple(map(float, r[:2])): r[3] for r in scan.rows()}
    assert rows[(7.0, 1.0)] == "swallowing"
    I_roots = sorted(b - a for a, b in scan.boundaries["I=0"])
    II_roots = sorted(b - a for a, b in scan.boundaries["II=0"])
    np.testing.assert_allclose(I_roots, -4.0, atol=0.02)
    np.testing.assert_allclose(II_roots, -8.0, atol=0.02)


def test_scan_marks_invalid_cells():
    scan = phase_scan((0, 2), (0, 2), 1.0, 0.5)
    for a, b, c, label, I, II in scan.rows():
        if c * c > a * b:
            assert label == "invalid" and math.isnan(I)
        else:
            assert label in LABELS


def test_scan_worker_independent():
    s1 = phase_scan((1, 4), (1, 2), 0.3, 0.5, grid=256)
    s2 = phase_scan((1, 4), (1, 2), 0.3, 0.5, grid=256, workers=2)
    assert (s1.labels == s2.labels).all()
    np.testing.assert_array_equal(s1.I, s2.I)
    assert s1.boundaries == s2.boundaries
