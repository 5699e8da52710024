import cmath
import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscitime.conjugates import (
    AnglePairing,
    AngleVariant,
    CCRDomainClass,
    FamilyClass,
    OddSector,
    PolySpec,
    angle_operator,
    ccr_polynomial_roots,
    classify,
    conjugate_operator,
    estimate_radius,
    exterior_diagnostic,
    finite_ccr_root_solver,
    galapon_band_form,
    galapon_operator,
    general_angle_builder,
    pairing_check,
    poly_time_operator,
    reduction_identity_check,
    unitary_gauge_check,
    weighted_galapon,
)
from oscitime.errors import (
    DegenerateEquationError,
    DomainError,
    HypothesisError,
    PairingError,
    PreconditionError,
)
from oscitime.fock import ResidueClassZero, ccr_domain_sample
from oscitime.operators import Number, apply, hermitian_norm, make

# -- classification ---------------------------------------------------------


@pytest.mark.parametrize(
    "omega, m, family, bounded, dom",
    [
        (0, 2, FamilyClass.Zero, False, CCRDomainClass.InfiniteDim),
        (0.5, 1, FamilyClass.OpenDisc, False, CCRDomainClass.FiniteDim),
        (1, 1, FamilyClass.Boundary, True, CCRDomainClass.Dense),
        (1j, 3, FamilyClass.Boundary, True, CCRDomainClass.Dense),
        (0.3 - 0.4j, 2, FamilyClass.OpenDisc, False, CCRDomainClass.FiniteDim),
    ],
)
def test_classification_matches_table(omega, m, family, bounded, dom):
    _, fam = conjugate_operator(omega, m, 16)
    assert fam.classification is family
    assert fam.bounded is bounded and fam.ccr_domain is dom
    doc = fam.to_dict(witnesses=["w"])
    assert doc["family"] == family.value and doc["witnesses"] == ["w"]


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(-math.pi, math.pi), st.integers(1, 6))
def test_classification_is_total_on_closed_disc(r, theta, m):
    fam = classify(r * cmath.exp(1j * theta), m)
    if r == 0:
        assert fam.classification is FamilyClass.Zero
    elif r == 1:
        assert fam.classification is FamilyClass.Boundary
    else:
        assert fam.classification is FamilyClass.OpenDisc


def test_classification_rejects_exterior_and_bad_m():
    with pytest.raises(DomainError):
        classify(1.5, 1)
    with pytest.raises(DomainError):
        classify(0.5, 0)


def test_unbounded_families_have_no_dense_form():
    op, _ = conjugate_operator(0.5, 1, 16)
    with pytest.raises(DomainError):
        op.dense_operator()


# -- Galapon ----------------------------------------------------------------


def test_galapon_d2():
    np.testing.assert_array_equal(galapon_operator(2).to_dense(), [[0, -1j], [1j, 0]])


def test_galapon_entries():
    D = 9
    M = galapon_operator(D).to_dense()
    for n in range(D):
        for m in range(D):
            assert M[n, m] == (0 if n == m else 1j / (n - m))


@pytest.mark.parametrize("D", [2, 3, 17, 64, 128])
def test_galapon_band_form_exact(D):
    np.testing.assert_array_equal(galapon_operator(D).to_dense(), galapon_band_form(D).to_dense())


def test_galapon_self_adjoint_exact():
    G = galapon_operator(33)
    np.testing.assert_array_equal(G.adjoint().to_dense(), G.to_dense())


def test_galapon_rejects_small_dim():
    with pytest.raises(DomainError):
        galapon_operator(1)


def test_galapon_is_sum_of_boundary_member_and_adjoint():
    D = 48
    op, _ = conjugate_operator(1, 1, D)
    np.testing.assert_allclose(op.symmetric_operator().to_dense(), galapon_operator(D).to_dense(), atol=1e-15)


def test_galapon_norm_monotone_and_bounded():
    norms = [hermitian_norm(galapon_operator(D)) for D in (64, 128, 256)]
    assert all(a <= b for a, b in zip(norms, norms[1:]))
    assert norms[-1] <= math.pi + 1e-9


@pytest.mark.parametrize("omega, m", [(1, 1), (1j, 2), (cmath.exp(1j * math.pi / 3), 3), (-1, 2)])
def test_boundary_off_diagonal_bounded_by_pi_over_m(omega, m):
    # the diagonal carries the scalar 2 Re((i/m) log omega); the rest is Hilbert-type
    for D in (64, 256):
        op, _ = conjugate_operator(omega, m, D)
        S = op.symmetric_operator().to_dense()
        off = S - np.diag(np.diag(S))
        assert hermitian_norm(off) <= math.pi / m + 1e-6


# -- weighted Galapon -------------------------------------------------------


def test_weighted_galapon_unit_weight_is_galapon():
    D = 40
    np.testing.assert_allclose(
        weighted_galapon(lambda n: 1.0, D).to_dense(), galapon_operator(D).to_dense(), atol=1e-15
    )


@pytest.mark.parametrize("seed", range(3))
def test_unitary_gauge_with_random_phases(seed):
    rng = np.random.default_rng(seed)
    th = rng.uniform(0, 2 * math.pi, 200)
    rep = unitary_gauge_check(lambda n: cmath.exp(1j * th[n]), 64)
    assert rep["shift_deviation"] <= 1e-14
    assert rep["galapon_deviation"] <= 1e-13


def test_weighted_galapon_symmetrized_is_symmetric():
    W = weighted_galapon(lambda n: ((n + 2) / (n + 1)) ** 0.25, 64, symmetrize=True)
    M = W.to_dense()
    assert np.abs(M - M.conj().T).max() <= 1e-14
    assert W.info["growth_ok"]


def test_weighted_galapon_zero_weight():
    with pytest.raises(DomainError):
        weighted_galapon(lambda n: 0.0 if n == 3 else 1.0, 8)


# -- polynomial time operators ----------------------------------------------


def test_poly_roots_double():
    p = PolySpec((0, 2, -1))
    roots = p.roots_of_one_minus_p
    assert len(roots) == 2
    for r in roots:
        assert abs(r - 1) <= 1e-6
        assert abs(1 - p(r)) <= 1e-10


@pytest.mark.parametrize("p", [PolySpec((0, 2, -1)), PolySpec.monomial(1j, 3), PolySpec((0, 1))])
def test_poly_forward_identities(p):
    ctx = poly_time_operator(p, 64)
    for seed in range(3):
        for d in ctx.forward_identities(ctx.random_psi(seed)):
            assert d["first"] <= 1e-13 and d["second"] <= 1e-13


@pytest.mark.parametrize("p", [PolySpec((0, 2, -1)), PolySpec.monomial(cmath.exp(0.4j), 2), PolySpec((0, 1))])
def test_poly_commutator_on_domain_vectors(p):
    ctx = poly_time_operator(p, 64)
    X = ctx.operator()
    N = make(Number(), 64)
    for seed in range(3):
        phi = ctx.domain_vector(ctx.random_psi(seed))
        r = apply(N, apply(X, phi)) - apply(X, apply(N, phi)) + phi.scaled(ctx.m)
        assert r.norm() <= 1e-12 * max(1.0, phi.norm())


def test_poly_log_coefficients_recurrence():
    ctx = poly_time_operator(PolySpec.monomial(1j, 3), 64)
    np.testing.assert_allclose(ctx.log_coefficients(30), ctx.log_coefficients_recurrence(30), atol=1e-14)


def test_poly_monomial_reduces_to_boundary():
    omega, m, D = cmath.exp(0.7j), 2, 64
    # 1 - omega z^m = omega (conj(omega) - z^m): the boundary member at conj(omega)
    ctx = poly_time_operator(PolySpec.monomial(omega, m), D)
    op, _ = conjugate_operator(omega.conjugate(), m, D)
    T = ctx.time_operator().to_dense()
    S = op.symmetric_operator().to_dense()
    # the two differ by a multiple of the identity (the scalar log terms)
    off = T - S
    assert np.abs(off - off[0, 0] * np.eye(D)).max() <= 1e-12
    N = make(Number(), D)
    phi = ccr_domain_sample(ResidueClassZero(omega.conjugate(), m), 1, D)
    Tm = ctx.time_operator()
    r = apply(N, apply(Tm, phi)) - apply(Tm, apply(N, phi)) + phi.scaled(1j)
    assert r.norm() <= 1e-12


def test_poly_root_off_circle():
    with pytest.raises(HypothesisError):
        poly_time_operator(PolySpec((0, 0.5)), 16)


# -- angle operators ---------------------------------------------------------


@pytest.mark.parametrize("variant", [AngleVariant.S0, AngleVariant.S1])
def test_angle_eigenvalue(variant):
    beta = 0.5
    ctx = angle_operator(variant, 16)
    D, prec = ctx.plan(beta)
    ctx = ctx.with_dim(D)
    v = ctx.eigenvector(beta, prec=prec)
    r = (apply(ctx.inner, v) - v.scaled(beta)).without_hp()
    assert r.norm() <= 1e-11 * v.without_hp().norm()


@pytest.mark.parametrize("variant", [AngleVariant.S0, AngleVariant.S1])
def test_angle_log_eigenvalue(variant):
    beta = 0.5
    ctx = angle_operator(variant, 16)
    D, prec = ctx.plan(beta)
    ctx = ctx.with_dim(D)
    v = ctx.eigenvector(beta, prec=prec)
    w, rep = ctx.log_apply(v)
    assert rep.converged
    assert (w - v.scaled(math.log(beta))).without_hp().norm() <= 1e-9


def test_angle_unboundedness_witness():
    # eigenvalues log(beta) decrease without bound as beta -> 0
    vals = []
    for beta in (1e-1, 1e-2, 1e-3):
        ctx = angle_operator(AngleVariant.S0, 64)
        v = ctx.eigenvector(beta)
        Av = apply(ctx.inner, v)
        vals.append(math.log(abs(v.inner(Av) / v.inner(v))))
    assert vals[0] > vals[1] > vals[2]
    assert vals[-1] < -6.9


# -- pairings ----------------------------------------------------------------


def test_pairing_telescoping():
    beta = 0.5
    rep = pairing_check(AnglePairing(lambda n: n, lambda n: beta / 2, beta), 64)
    assert rep.passed and rep.max_deviation == 0.0
    assert rep.radius == pytest.approx(0.5, abs=1e-9)


def test_pairing_reproduces_s0():
    f = lambda n: math.sqrt(n * (n - 1))  # noqa: E731
    g = lambda n: math.sqrt(n / (n - 1)) if n > 1 else 0.0  # noqa: E731
    rep = pairing_check(AnglePairing(f, g, 2.0), 64)
    assert rep.passed and rep.max_deviation <= 1e-13
    assert rep.radius == pytest.approx(0.5, abs=1e-6)


def test_pairing_empty_region():
    rep = pairing_check(AnglePairing(lambda n: n * n, lambda n: 0.25 / n if n else 0.0, 0.5), 64)
    assert rep.region_empty
    assert not rep.admissible(0.1)
    assert rep.to_dict()["region_empty"] is True


def test_estimate_radius():
    assert estimate_radius(lambda n: n)[0] == pytest.approx(0.5, abs=1e-9)
    assert estimate_radius(lambda n: 1.0)[0] == math.inf
    assert estimate_radius(lambda n: n * n)[0] == 0.0


def test_pairing_violation_reports_first_n():
    bad = AnglePairing(lambda n: n, lambda n: 0.25 if n < 10 else 0.3, 0.5)
    rep = pairing_check(bad, 64)
    assert not rep.passed and rep.first_failure == 8
    with pytest.raises(PairingError) as exc:
        general_angle_builder(bad, 32)
    assert exc.value.index == 8


def _affine_pair(beta):
    return AnglePairing(lambda n: 1, lambda n: gmpy2.mpq(n, 2) * beta, beta)


def test_general_angle_eigenrelation():
    beta, alpha = 1.0, 0.6
    ctx = general_angle_builder(_affine_pair(beta), 200)
    assert abs(1 - alpha * beta) <= 0.5
    v = ctx.family_vector(alpha, 0, prec=256)
    r = (apply(ctx.inner(), v) - v.scaled(ctx.eigenvalue(alpha))).without_hp()
    assert np.abs(r.coeffs[:150]).max() <= 1e-11
    assert ctx.expected_log_eigenvalue == -2


def test_general_angle_log_on_first_family_member():
    # (f L*^2) xi_alpha = d/dalpha xi_alpha, so log(A) of it is
    # xi_alpha / alpha + log(alpha beta) (f L*^2) xi_alpha
    beta, alpha = 1.0, 0.6
    ctx = general_angle_builder(_affine_pair(beta), 200)
    v0 = ctx.family_vector(alpha, 0, prec=256)
    v1 = ctx.family_vector(alpha, 1, prec=256)
    w, rep = ctx.log_apply(v1)
    assert rep.converged
    expected = v0.scaled(1 / alpha) + v1.scaled(math.log(alpha * beta))
    assert np.abs((w - expected).without_hp().coeffs[:120]).max() <= 1e-12
    w0, _ = ctx.log_apply(v0)
    assert np.abs((w0 - v0.scaled(math.log(alpha * beta))).without_hp().coeffs[:120]).max() <= 1e-12


def test_general_angle_odd_sector():
    beta = 1.0
    odd = OddSector(h=lambda n: 1, g=lambda n: gmpy2.mpq(n - 1, 2) * beta if n > 0 else 0, f=lambda n: 1, beta=beta)
    ctx = general_angle_builder(_affine_pair(beta), 200, odd=odd)
    v = ctx.family_vector(0.6, 0, sector=1, prec=256)
    r = (apply(ctx.inner(1), v) - v.scaled(ctx.eigenvalue(0.6, 1))).without_hp()
    assert np.abs(r.coeffs[:150]).max() <= 1e-11


# -- reduction identity ----------------------------------------------------


@pytest.mark.parametrize(
    "f, g, k, alpha",
    [
        (lambda n: n, lambda n: 1, 1, 0.4),
        (lambda n: 1, lambda n: n, 2, 0.2),
        (lambda n: gmpy2.sqrt(n), lambda n: gmpy2.sqrt(n), 1, 0.4),
    ],
)
def test_reduction_identity(f, g, k, alpha):
    rep = reduction_identity_check(f, g, k, alpha)
    assert rep.passed(1e-9)
    assert rep.lhs_norm > 0


def test_reduction_identity_preconditions():
    with pytest.raises(PreconditionError):
        reduction_identity_check(lambda n: n, lambda n: 2, 1, 0.4, D=32)
    with pytest.raises(PreconditionError):
        reduction_identity_check(lambda n: n, lambda n: 1, 1, 1.5)


# -- root solver and exterior diagnostic -----------------------------------


def test_root_solver_m1():
    rs = finite_ccr_root_solver(0.8, 1, 0.2)
    assert rs.roots[0] == pytest.approx(2 / 15, abs=1e-15)
    assert rs.admissible == (True,)
    assert abs(1 - 0.8 + rs.roots[0]) == pytest.approx(1 / 3, abs=1e-12)


def test_root_solver_m2():
    rs = finite_ccr_root_solver(0.5, 2, 0.1)
    a, b = rs.roots
    assert abs(a + b) <= 1e-15
    assert all(abs(r) < 1 for r in rs.roots) and all(rs.admissible)
    oracle = np.roots([-(0.1 + 2), 0, 0.1 * 0.5])
    assert sorted(abs(np.array(rs.roots) - oracle[0]))[0] <= 1e-14


def test_root_solver_degenerate():
    with pytest.raises(DegenerateEquationError):
        finite_ccr_root_solver(0.5, 1, -1)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.05, 0.95),
    st.floats(-math.pi, math.pi),
    st.integers(1, 4),
    st.floats(0.05, 3.0),
)
def test_root_solver_satisfies_polynomial(r, th, m, c):
    omega = r * cmath.exp(1j * th)
    rs = finite_ccr_root_solver(omega, m, c)
    for a in rs.roots:
        assert abs(-(c + m) * a**m + c * omega) <= 1e-12
    # agrees with the generic polynomial form for p(z) = omega - z^m
    p = [omega] + [0] * (m - 1) + [-1]
    generic = ccr_polynomial_roots(p, c)
    for a in rs.roots:
        assert min(abs(a - b) for b in generic) <= 1e-8


def test_exterior_diagnostic_finds_only_isolated_solutions():
    diag = exterior_diagnostic(2.0, 1, 0.5, 64)
    assert diag.solution_count == 1
    assert diag.residuals[0] <= 1e-10
    assert diag.dense_domain_residual > 1e-3
    with pytest.raises(DomainError):
        exterior_diagnostic(0.5, 1)
