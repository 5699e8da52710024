import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from oscitime.errors import AccuracyWarning, DomainError
from oscitime.hermite import (
    GaussianProfile,
    Parity,
    beta_of_alpha,
    bridge_check,
    gaussian_norm_squared,
    gaussian_to_fock,
    hermite_functions,
    quadrature_overlap,
    write_bridge_csv,
)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_profile_domain(alpha):
    with pytest.raises(DomainError):
        GaussianProfile(alpha)


def test_beta_map():
    assert beta_of_alpha(1 / 3) == pytest.approx(0.5)
    assert GaussianProfile(0.6).beta == beta_of_alpha(0.6)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6))
def test_beta_map_is_involution_into_unit_interval(a):
    b = beta_of_alpha(a)
    assert 0 < b < 1
    assert beta_of_alpha(b) == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_hermite_functions_match_scipy():
    x = np.linspace(-6, 6, 41)
    H = hermite_functions(30, x)
    for n in (0, 1, 5, 17, 30):
        ref = special.eval_hermite(n, x) * np.exp(-x * x / 2) / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
        np.testing.assert_allclose(H[n], ref, atol=1e-12)


def test_hermite_functions_orthonormal():
    y, w = np.polynomial.hermite.hermgauss(80)
    H = hermite_functions(40, y) * np.exp(y * y / 2)
    G = (H * w) @ H.T
    np.testing.assert_allclose(G, np.eye(41), atol=1e-12)


def test_hermite_functions_large_order_finite():
    H = hermite_functions(200, np.linspace(-20, 20, 11))
    assert np.all(np.isfinite(H))


def test_near_one_limit_is_vacuum():
    v = gaussian_to_fock(GaussianProfile(1 - 1e-9), 16)
    assert abs(v.coeffs[0] - math.pi**0.25) <= 1e-8
    assert np.abs(v.coeffs[1:]).max() <= 1e-8


def test_xi2_component_at_one_third():
    v = gaussian_to_fock(GaussianProfile(1 / 3), 16)
    expected = math.pi**0.25 * math.sqrt(2 / (4 / 3)) * 0.25 * math.sqrt(2)
    assert abs(v.coeffs[2] - expected) <= 1e-14
    assert abs(quadrature_overlap(2, GaussianProfile(1 / 3)) - expected) <= 1e-10


def test_odd_profile_support():
    v = gaussian_to_fock(GaussianProfile(0.5, Parity.Odd), 32)
    assert not np.any(v.coeffs[0::2])
    assert np.all(np.abs(v.coeffs[1::2][:8]) > 0)


def test_even_profile_support():
    v = gaussian_to_fock(GaussianProfile(0.5, Parity.Even), 32)
    assert not np.any(v.coeffs[1::2])


def test_quadrature_parity_zero():
    assert abs(quadrature_overlap(1, GaussianProfile(0.5))) <= 1e-15
    assert abs(quadrature_overlap(2, GaussianProfile(0.5, Parity.Odd))) <= 1e-15


def test_quadrature_near_one_limit():
    q = quadrature_overlap(0, GaussianProfile(0.999))
    assert q.real == pytest.approx(math.pi**0.25, rel=1e-3)
    assert q.imag == 0


@pytest.mark.parametrize("k", range(6))
def test_quadrature_matches_closed_form_even(k):
    prof = GaussianProfile(1 / 3)
    v = gaussian_to_fock(prof, 16)
    assert abs(quadrature_overlap(2 * k, prof) - v.coeffs[2 * k]) <= 1e-10


def test_quadrature_agrees_with_adaptive_integration():
    prof = GaussianProfile(0.4, Parity.Odd)
    for n in (1, 3, 7):
        ref, _ = integrate.quad(lambda x: hermite_functions(n, x)[n, 0] * prof(x), -np.inf, np.inf, epsabs=1e-13)
        assert abs(quadrature_overlap(n, prof).real - ref) <= 1e-10


def test_small_quadrature_warns():
    with pytest.warns(AccuracyWarning, match="estimated error"):
        quadrature_overlap(30, GaussianProfile(0.5), Q=20)


def test_default_quadrature_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        quadrature_overlap(30, GaussianProfile(0.5))


@pytest.mark.parametrize("alpha", [0.5, 0.3, 0.8])
def test_bridge(alpha):
    rep = bridge_check(alpha, 40, 1e-8)
    assert rep.passed
    assert rep.norm_deviation <= 1e-8
    assert len(rep.rows) == 2 * 41


@pytest.mark.parametrize("parity", list(Parity))
@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
def test_norm_consistency(parity, alpha):
    prof = GaussianProfile(alpha, parity)
    v = gaussian_to_fock(prof, "auto(1e-18)")
    assert abs(v.squared_norm() - gaussian_norm_squared(prof)) / gaussian_norm_squared(prof) <= 1e-8


def test_norm_formula_against_integration():
    for parity in Parity:
        prof = GaussianProfile(0.35, parity)
        ref, _ = integrate.quad(lambda x: prof(x) ** 2, -np.inf, np.inf, epsabs=1e-13)
        assert gaussian_norm_squared(prof) == pytest.approx(ref, rel=1e-10)


def test_bridge_csv(tmp_path):
    rep = bridge_check(0.5, 4)
    p = tmp_path / "b.csv"
    write_bridge_csv(p, rep)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["parity", "n", "re", "im", "quadrature_re", "deviation"]
    assert len(rows) == 1 + 2 * 5
    assert rows[1][0] == "Even" and rows[-1][0] == "Odd"
    assert rep.to_dict()["passed"] is True
