import cmath
import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscitime.conjugates import AngleVariant, ConjugateOperator, _tails, galapon_operator
from oscitime.errors import DomainError
from oscitime.evolution import (
    EvolutionParams,
    angle_periodicity_check,
    evolve,
    galapon_evolved,
    periodicity_check,
    phase_diagonal,
    weak_weyl_failure_probe,
    write_period_sweep_csv,
)
from oscitime.fock import generalized_eigen_vector
from oscitime.operators import LeftShift, make

OMEGAS = [1, 1j, cmath.exp(1j * math.pi / 3), -1, cmath.exp(-2.1j)]


def test_phase_diagonal_conjugates_shift():
    D, t = 16, 0.83
    U = np.diag(phase_diagonal(t, D))
    L = make(LeftShift(), D).to_dense()
    np.testing.assert_allclose(U @ L @ U.conj().T, cmath.exp(-1j * t) * L, atol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("omega", OMEGAS)
def test_conjugated_equals_direct(omega, m):
    for t in (-2.0, 0.3, 1.7, 5.0):
        ctx = evolve(EvolutionParams(t, omega, m), 128)
        assert ctx.dense_deviation() <= 1e-12
        assert ctx.dense_deviation(symmetric=True) <= 1e-12


def test_zero_time_is_identity():
    ctx = evolve(EvolutionParams(0.0, 1j, 2), 64)
    T = ConjugateOperator(1j, 2, 64).dense_operator().to_dense()
    np.testing.assert_array_equal(ctx.conjugated_dense(), T)
    np.testing.assert_array_equal(ctx.direct_dense(), T)


def test_galapon_evolved_entries():
    D, t = 12, 0.9
    M = galapon_evolved(t, D)
    for n in range(D):
        for k in range(D):
            expected = 0 if n == k else cmath.exp(1j * t * (n - k)) * 1j / (n - k)
            assert abs(M[n, k] - expected) <= 1e-15


def test_galapon_period_two_pi():
    D = 128
    for t in (0.0, 0.4, 2.5):
        dev = np.abs(galapon_evolved(t, D) - galapon_evolved(t + 2 * math.pi, D)).max()
        assert dev <= 1e-12
    # the boundary member (1, 1) evolves into the same operator
    ctx = evolve(EvolutionParams(0.4, 1, 1), D)
    assert np.abs(ctx.conjugated_dense(True) - galapon_evolved(0.4, D)).max() <= 1e-12


@pytest.mark.parametrize("omega, m, t", [(1, 2, 0.7), (1j, 1, 1.3), (cmath.exp(0.5j), 3, -0.4)])
def test_periodicity_dense(omega, m, t):
    rep = periodicity_check(EvolutionParams(t, omega, m), 128)
    assert rep.mode == "dense" and rep.passed


def test_period_is_two_pi_over_m():
    assert EvolutionParams(0.0, 1, 3).period == pytest.approx(2 * math.pi / 3)


def test_half_period_is_not_a_period():
    p = EvolutionParams(0.3, 1, 2)
    a = evolve(p, 64).conjugated_dense(True)
    b = evolve(p.shifted(p.period / 2), 64).conjugated_dense(True)
    assert np.abs(a - b).max() > 0.1


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10), st.integers(1, 4), st.floats(-math.pi, math.pi))
def test_periodicity_property(t, m, theta):
    rep = periodicity_check(EvolutionParams(t, cmath.exp(1j * theta), m), 48)
    assert rep.deviation <= 1e-12


def test_periodicity_unbounded_needs_vector():
    with pytest.raises(DomainError):
        periodicity_check(EvolutionParams(0.3, 0.5, 1), 32)


def test_zero_family_vectorwise():
    # L^2 eigenvalue m alpha = 0.5 becomes 0.5 e^{-2it}, still inside |1 - mu| < 1
    t, m, alpha = 0.3, 2, 0.25
    p = EvolutionParams(t, 0.0, m)
    mu = m * alpha * cmath.exp(-1j * m * t)
    v64 = generalized_eigen_vector(lambda n: n, m, alpha, 64)
    D, prec = ConjugateOperator(0.0, m, 64, phase=cmath.exp(-1j * m * t)).plan(_tails(v64), mu)
    v = generalized_eigen_vector(lambda n: n, m, alpha, D, prec=prec)
    ctx = evolve(p, D)
    a, _ = ctx.direct_apply(v)
    b, _ = ctx.conjugated_apply(v)
    assert np.abs((a - b).coeffs).max() <= 1e-12
    assert periodicity_check(p, D, vector=v).deviation <= 1e-12
    expected = v.scaled(0.5j * cmath.log(mu))
    assert np.abs((a - expected).coeffs).max() <= 1e-12


@pytest.mark.parametrize("variant", [AngleVariant.S0, AngleVariant.S1])
@pytest.mark.parametrize("beta, t", [(0.5, 0.4), (0.8, 0.2), (0.3, -0.3)])
def test_angle_period_pi(variant, beta, t):
    r = angle_periodicity_check(variant, beta, t)
    assert r["period_deviation"] <= 1e-12
    assert r["construction_deviation"] <= 1e-12
    assert r["eigen_residual"] <= 1e-12
    assert r["passed"]


def test_angle_period_outside_disc():
    with pytest.raises(DomainError):
        angle_periodicity_check(AngleVariant.S0, 0.5, math.pi / 2)


def test_weak_weyl_unit_time():
    rep = weak_weyl_failure_probe(EvolutionParams(1.0, 1, 1), 128)
    assert rep.diagonal_deviation <= 1e-13
    assert rep.weyl_gap == 1.0
    assert not rep.degenerate
    assert rep.return_deviation > 0.1


def test_weak_weyl_zero_time_is_degenerate():
    rep = weak_weyl_failure_probe(EvolutionParams(0.0, 1, 1), 64)
    assert rep.degenerate and rep.weyl_gap == 0.0 and rep.return_deviation == 0.0


def test_weak_weyl_full_period():
    t = 2 * math.pi / 3
    rep = weak_weyl_failure_probe(EvolutionParams(t, 1, 3), 128)
    # T(t) returns to T up to rounding while the weak Weyl shift would be 2 pi/3
    assert rep.return_deviation <= 1e-13
    assert rep.weyl_gap == pytest.approx(t)
    assert rep.diagonal_deviation <= 1e-13


def test_weak_weyl_rejects_open_disc():
    with pytest.raises(DomainError):
        weak_weyl_failure_probe(EvolutionParams(1.0, 0.5, 1), 16)


def test_diagonal_invariance_grid():
    for omega in OMEGAS:
        for m in (1, 2, 3):
            for t in np.linspace(-3, 3, 5):
                assert weak_weyl_failure_probe(EvolutionParams(float(t), omega, m), 64).diagonal_deviation <= 1e-13


def test_period_sweep_csv(tmp_path):
    reps = [periodicity_check(EvolutionParams(t, 1j, 2), 32) for t in (0.1, 0.2)]
    p = tmp_path / "sweep.csv"
    write_period_sweep_csv(p, reps)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["omega_re", "omega_im", "m", "t", "deviation"]
    assert rows[1][:4] == ["0.0", "1.0", "2", "0.1"]
    assert float(rows[1][4]) == reps[0].deviation


def test_galapon_operator_reference_unchanged_by_evolution():
    D = 32
    G = galapon_operator(D).to_dense()
    np.testing.assert_allclose(galapon_evolved(0.0, D), G, atol=0)
