import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscitime.conjugates import AngleVariant, angle_operator
from oscitime.errors import ContourError, DimensionMismatchError, DomainError
from oscitime.fock import FockVector, basis_vector, generalized_eigen_vector, geometric_vector
from oscitime.operators import (
    Annihilate,
    BandedOperator,
    Create,
    Identity,
    LeftShift,
    RightShift,
    apply,
    make,
    power,
)
from oscitime.opfunc import (
    SeriesKind,
    SeriesPolicy,
    SeriesReport,
    SeriesStatus,
    divergence_probe,
    dunford_log,
    log_series_terms,
    plan_log_series,
    principal_log_apply,
    scalar_log_series,
    series_apply,
)


def test_log_of_identity_is_zero():
    D = 12
    v = geometric_vector(0.4, D)
    w, rep = series_apply(SeriesKind.Log, make(Identity(), D), v)
    assert not np.any(w.coeffs)
    assert rep.status is SeriesStatus.Converged
    assert rep.terms_used <= SeriesPolicy().streak


def test_log_of_angle_inner_on_super_coherent():
    beta = 0.5
    ctx = angle_operator(AngleVariant.S0, 16)
    D, prec = ctx.plan(beta, tol=1e-12)
    ctx = ctx.with_dim(D)
    v = ctx.eigenvector(beta, prec=prec)
    w, rep = ctx.log_apply(v)
    assert rep.converged
    dev = (w - v.scaled(math.log(beta))).without_hp()
    assert dev.norm() <= 1e-10 * v.norm()


def test_log_of_shifted_power_matches_scalar_series():
    omega, m, alpha = 0.9 + 0.2j, 2, 0.15
    D = 160
    v = generalized_eigen_vector(lambda n: n, m, alpha, D, prec=256)
    mu = m * alpha
    A = make(Identity(), D).scaled(omega) - power(make(LeftShift(), D), m)
    w, rep = series_apply("Log", A, v)
    assert rep.converged
    expected = scalar_log_series(omega - mu)
    assert abs(expected - cmath.log(omega - mu)) <= 1e-14
    head = slice(0, 60)
    dev = np.abs(w.without_hp().coeffs[head] - expected * v.without_hp().coeffs[head]).max()
    assert dev <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-math.pi, math.pi), st.floats(0.0, 0.9))
def test_scalar_consistency_on_diagonal(r, theta, frac):
    # eigenpairs of a diagonal operator: A xi_n = mu_n xi_n
    D = 6
    mus = 1 - r * np.exp(1j * (theta + np.arange(D))) * (1 - frac * np.arange(D) / D)
    A = BandedOperator.from_dense(np.diag(mus))
    for n in range(D):
        w, rep = series_apply("Log", A, basis_vector(n, D))
        assert rep.converged
        assert abs(w.coeffs[n] - scalar_log_series(mus[n])) <= 1e-12


def test_branch_consistency_principal_vs_series():
    # principal Log(1 - A) and log of (1 - A) share the same series
    D = 40
    A = make(LeftShift(), D).scaled(0.5)
    v = geometric_vector(0.7, D)
    p, _ = principal_log_apply(1.0, A, v)
    s, _ = series_apply("Log", make(Identity(), D) - A, v)
    np.testing.assert_allclose(p.coeffs, s.coeffs, atol=1e-13)


def test_exp_inverts_log_on_diagonal():
    D = 8
    mus = 1 - np.linspace(0.1, 0.7, D) * np.exp(0.8j * np.arange(D))
    A = BandedOperator.from_dense(np.diag(mus))
    v = FockVector(np.linspace(1, 2, D))
    logs = np.array([scalar_log_series(mu) for mu in mus])
    w, _ = series_apply("Log", A, v)
    np.testing.assert_allclose(w.coeffs, logs * v.coeffs, atol=1e-12)
    e, rep = series_apply("Exp", BandedOperator.from_dense(np.diag(logs)), v)
    assert rep.converged
    np.testing.assert_allclose(e.coeffs, apply(A, v).coeffs, atol=1e-10)


@pytest.mark.parametrize("x", [0.1, 0.5, -0.7, 0.95])
def test_arctan_scalar_consistency(x):
    D = 3
    A = BandedOperator.from_dense(np.diag([x, x / 2, 0.0]))
    w, rep = series_apply(SeriesKind.Arctan, A, FockVector([1.0, 1.0, 1.0]), SeriesPolicy(tol=1e-15, k_max=10**6))
    assert rep.converged
    np.testing.assert_allclose(w.coeffs.real, [-math.atan(x), -math.atan(x / 2), 0.0], atol=1e-12)


def test_series_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        series_apply("Log", make(Identity(), 4), basis_vector(0, 5))


def test_series_divergence_is_reported_not_raised():
    D = 8
    A = make(Identity(), D).scaled(-2.0)
    _, rep = series_apply("Log", A, basis_vector(0, D))
    assert rep.status is SeriesStatus.Diverged


def test_principal_log_of_one_minus_shift_on_basis():
    D, n = 16, 6
    w, rep = principal_log_apply(1.0, make(LeftShift(), D), basis_vector(n, D))
    expected = np.zeros(D)
    for k in range(1, n + 1):
        expected[n - k] = -1.0 / k
    np.testing.assert_array_equal(w.coeffs.real, expected)
    assert not np.any(w.coeffs.imag)
    assert rep.converged


def test_principal_log_of_one_minus_right_shift_on_vacuum():
    # the compression keeps sum_{k<D} 1/k^2; the rest is 1/(D - 1/2) + O(D^-3)
    D = 10_000
    w, rep = principal_log_apply(1.0, make(RightShift(), D), basis_vector(0, D), SeriesPolicy(tol=1e-12, k_max=2 * D))
    assert rep.converged
    k = np.arange(1, D)
    np.testing.assert_allclose(w.coeffs[1:].real, -1.0 / k, rtol=1e-15)
    assert abs(w.squared_norm() - math.fsum(1.0 / k**2)) <= 1e-13
    assert abs(w.squared_norm() + 1.0 / (D - 0.5) - math.pi**2 / 6) <= 1e-8


def test_principal_log_nilpotent_action():
    D = 8
    w, _ = principal_log_apply(1j, power(make(LeftShift(), D), 2), basis_vector(1, D))
    np.testing.assert_allclose(w.coeffs, 0.5j * math.pi * basis_vector(1, D).coeffs, atol=1e-16)


def test_principal_log_branch_is_principal():
    D = 4
    w, _ = principal_log_apply(-1.0, make(LeftShift(), D), basis_vector(0, D))
    assert w.coeffs[0] == pytest.approx(1j * math.pi)


def test_principal_log_requires_unit_modulus():
    with pytest.raises(DomainError):
        principal_log_apply(1.5, make(LeftShift(), 4), basis_vector(0, 4))


def test_log_series_terms_and_plan():
    K = log_series_terms(0.5, 1e-12)
    assert 0.5 ** (K + 1) / ((K + 1) * 0.5) <= 1e-12 < 0.5**K / (K * 0.5)
    assert log_series_terms(0.0, 1e-12) == 1
    with pytest.raises(DomainError):
        log_series_terms(1.0, 1e-12)
    v = geometric_vector(0.5, 16)
    D, prec, K = plan_log_series(v.tail, 0.5, 1.0, 1.5, tol=1e-12)
    assert D >= 16 and prec >= 128 and K > 0


def test_scalar_log_series_domain():
    assert abs(scalar_log_series(0.5) - math.log(0.5)) <= 1e-15
    with pytest.raises(DomainError):
        scalar_log_series(-0.5)


def test_dunford_matches_neumann_series():
    D = 24
    L = make(LeftShift(), D)
    M = dunford_log(2.0, 1, L, 1.3, Q=256).to_dense()
    Ld = L.to_dense()
    ref = math.log(2.0) * np.eye(D, dtype=complex)
    P = np.eye(D, dtype=complex)
    for k in range(1, D):
        P = P @ Ld / 2
        ref -= P / k
    assert np.abs(M - ref).max() <= 1e-8


def test_dunford_on_zero_operator():
    D = 6
    M = dunford_log(2.0, 1, BandedOperator(D, {}), 1.3, Q=64).to_dense()
    assert np.abs(M - math.log(2) * np.eye(D)).max() <= 1e-12


def test_dunford_power_two_agrees_with_series():
    D = 20
    L = make(LeftShift(), D)
    M = dunford_log(3.0, 2, L, 1.2, Q=256).to_dense()
    L2 = np.linalg.matrix_power(L.to_dense(), 2)
    ref = math.log(3.0) * np.eye(D, dtype=complex)
    P = np.eye(D, dtype=complex)
    for k in range(1, D):
        P = P @ L2 / 3
        ref -= P / k
    assert np.abs(M - ref).max() <= 1e-8


@pytest.mark.parametrize("omega", [1.0, 1j, 0.5])
def test_dunford_rejects_non_exterior(omega):
    with pytest.raises(ContourError):
        dunford_log(omega, 1, make(LeftShift(), 8), 1.0)


def test_dunford_radius_outside_window():
    with pytest.raises(ContourError):
        dunford_log(2.0, 1, make(LeftShift(), 8), 2.5)


def _harmonic(K):
    return np.cumsum(1.0 / np.arange(1, K + 1))


@pytest.mark.parametrize("m", [0, 1, 3])
def test_divergence_probe_lowering(m):
    D, K = m + 8, 10_000
    s = divergence_probe(make(Annihilate(), D), basis_vector(m, D), m, K)
    H = _harmonic(K)
    assert np.all(np.abs(s[99:]) >= 0.99 * H[99:])


@pytest.mark.parametrize("m", [0, 2])
def test_divergence_probe_raising(m):
    D, K = m + 8, 10_000
    s = divergence_probe(make(Create(), D), basis_vector(m, D), m, K)
    H = _harmonic(K)
    assert np.all(np.abs(s[99:]) >= 0.99 * H[99:])


def test_divergence_probe_ratio_is_stable():
    D, K = 8, 10_000
    s = divergence_probe(make(Annihilate(), D), basis_vector(2, D), 2, K)
    ratio = np.abs(s) / _harmonic(K)
    window = ratio[999:]
    assert window.max() - window.min() <= 0.01 * window.mean()
    assert window.min() > 0


def test_divergence_probe_identity():
    D = 5
    s = divergence_probe(make(Identity(), D), geometric_vector(0.5, D), 1, 50)
    assert not np.any(s)


def test_report_json_roundtrip():
    D = 10
    _, rep = series_apply("Log", make(Identity(), D).scaled(0.8), basis_vector(0, D), SeriesPolicy(keep_trace=True))
    doc = json.loads(rep.to_json())
    back = SeriesReport.from_dict(doc)
    assert back.status is rep.status and back.terms_used == rep.terms_used
    np.testing.assert_array_equal(back.partial_norm_trace, rep.partial_norm_trace)
    assert rep.converged and rep.last_increment <= SeriesPolicy().tol


def test_policy_validation():
    with pytest.raises(ValueError):
        SeriesPolicy(tol=0)
