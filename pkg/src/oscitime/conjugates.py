"""Conjugate operators of the number operator.

Builds the family ``T_{omega,m} = (i/m) log(omega - L^m)`` with its
three-way classification, the Galapon operator and its weighted variants,
the polynomial operators ``X_p``, the angle operators and their general
``(f, g, beta)`` pairings, and the root solver for the finite CCR domains
of the open-disc family.
"""

import cmath
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import gmpy2
import numpy as np

from . import _hp
from .errors import (
    DegenerateEquationError,
    DomainError,
    GrowthConditionWarning,
    HypothesisError,
    PairingError,
    PreconditionError,
)
from .fock import (
    FockVector,
    TailBound,
    cumulative_weights,
    generalized_eigen_vector,
    geometric_vector,
    make_rng,
    super_coherent_vector,
)
from .operators import (
    Band,
    BandedOperator,
    Diagonal,
    FactorialWeight,
    Identity,
    LeftShift,
    Number,
    RightShift,
    apply,
    compose,
    make,
    operator_norm_estimate,
    power,
)
from .opfunc import (
    SeriesPolicy,
    dunford_log,
    plan_log_series,
    principal_log_apply,
    series_apply,
)

__all__ = [
    "FamilyClass",
    "CCRDomainClass",
    "ConjugateFamily",
    "classify",
    "ConjugateOperator",
    "conjugate_operator",
    "galapon_operator",
    "galapon_band_form",
    "weighted_galapon",
    "growth_exponent",
    "unitary_gauge_check",
    "PolySpec",
    "PolyTimeContext",
    "poly_time_operator",
    "AngleVariant",
    "AngleContext",
    "angle_operator",
    "AnglePairing",
    "OddSector",
    "PairingReport",
    "pairing_check",
    "GeneralAngleContext",
    "general_angle_builder",
    "ReductionReport",
    "reduction_identity_check",
    "RootSet",
    "finite_ccr_root_solver",
    "ccr_polynomial_roots",
    "ExteriorDiagnostic",
    "exterior_diagnostic",
    "plan_series",
]

UNIT_TOL = 1e-12


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


class FamilyClass(enum.Enum):
    Zero = "Zero"
    OpenDisc = "OpenDisc"
    Boundary = "Boundary"


class CCRDomainClass(enum.Enum):
    InfiniteDim = "InfiniteDim"
    FiniteDim = "FiniteDim"
    Dense = "Dense"


_EXPECTED = {
    FamilyClass.Zero: (False, CCRDomainClass.InfiniteDim),
    FamilyClass.OpenDisc: (False, CCRDomainClass.FiniteDim),
    FamilyClass.Boundary: (True, CCRDomainClass.Dense),
}


@dataclass(frozen=True)
class ConjugateFamily:
    """Parameters ``(omega, m)`` with the classification of ``T_{omega,m}``."""

    omega: complex
    m: int
    classification: FamilyClass
    bounded: bool
    ccr_domain: CCRDomainClass

    def to_dict(self, witnesses=()):
        return {
            "omega": [float(self.omega.real), float(self.omega.imag)],
            "m": int(self.m),
            "family": self.classification.value,
            "bounded": bool(self.bounded),
            "ccr_domain": self.ccr_domain.value,
            "witnesses": list(witnesses),
        }


def classify(omega, m):
    """Classify ``T_{omega,m}`` by ``|omega|``: zero, open disc or unit circle.

    Raises
    ------
    DomainError
        For ``|omega| > 1`` (handled by :func:`exterior_diagnostic`) or
        ``m < 1``.
    """
    omega = complex(omega)
    m = int(m)
    if m < 1:
        raise DomainError("m must be a positive integer")
    r = abs(omega)
    if r == 0.0:
        cls = FamilyClass.Zero
    elif abs(r - 1.0) <= UNIT_TOL:
        cls = FamilyClass.Boundary
    elif r < 1.0:
        cls = FamilyClass.OpenDisc
    else:
        raise DomainError(f"|omega| = {r:g} > 1 lies outside the classified families")
    bounded, dom = _EXPECTED[cls]
    return ConjugateFamily(omega, m, cls, bounded, dom)


# ---------------------------------------------------------------------------
# series planning
# ---------------------------------------------------------------------------


def plan_series(A, tails, q, tol=1e-12, *, principal=False, max_dim=1 << 14):
    """Truncation and precision for a certified log series with inner ``A``.

    Parameters
    ----------
    A : BandedOperator
        Inner operator (any truncation; only its generators are used).
        For ``principal=True`` pass the operator inside the principal Log,
        scaled by ``1/omega``.
    tails : TailBound or sequence
        Tail certificates the series will meet (for example ``phi`` and
        ``N phi``).
    q : float
        Convergence ratio: ``|1 - mu|`` for the plain log, ``|mu / omega|``
        for the principal Log.

    Returns
    -------
    (int, int)
        ``(D, prec)``.
    """
    a, _ = A.sup_band_sum()
    if principal:
        b = a
    else:
        b, _ = (make(Identity(), A.dim) - A).sup_band_sum()
    D, prec, _ = plan_log_series(tails, q, a, b, tol, max_dim=max_dim)
    return D, prec


def _tails(v, extra_ops=()):
    out = [v.tail]
    for op in extra_ops:
        out.append(apply(op.with_dim(v.dim), v).tail)
    return [t for t in out if t is not None]


# ---------------------------------------------------------------------------
# T_{omega,m}
# ---------------------------------------------------------------------------


class ConjugateOperator:
    """Handle for ``T_{omega,m}`` on a truncation of size ``D``.

    ``inner`` is ``omega 1 - phase L^m`` for the open-disc and boundary
    families and ``phase L^m`` for ``omega = 0`` (the zero family is the
    logarithm of the shift power itself).  ``phase`` is 1 except for time
    evolved members, where ``L^m`` becomes ``e^{-itm} L^m``.

    Boundary members are applied with the principal Log and have a dense
    form; the unbounded families are applied vector-wise with the plain
    log series only.
    """

    def __init__(self, omega, m, D, *, phase=1.0):
        self.family = classify(omega, m)
        self.omega = self.family.omega
        self.m = self.family.m
        self.dim = int(D)
        self.phase = complex(phase)
        if abs(abs(self.phase) - 1.0) > UNIT_TOL:
            raise DomainError("phase must have modulus one")
        self.shift_power = BandedOperator(self.dim, {self.m: Band(self.phase)}, name=f"L^{self.m}")
        if self.family.classification is FamilyClass.Zero:
            self.inner = self.shift_power
        else:
            self.inner = make(Identity(), self.dim).scaled(self.omega) - self.shift_power
        self.scale = 1j / self.m

    @property
    def classification(self):
        return self.family.classification

    def with_dim(self, D):
        return ConjugateOperator(self.omega, self.m, D, phase=self.phase)

    def log_apply(self, v, policy=None):
        """Unscaled logarithm of the inner operator applied to ``v``."""
        if self.classification is FamilyClass.Boundary:
            return principal_log_apply(self.omega, self.shift_power, v, policy)
        return series_apply("Log", self.inner, v, policy)

    def apply(self, v, policy=None, scale=None):
        """``scale * log(inner) v`` with default scale ``i/m``."""
        w, rep = self.log_apply(v, policy)
        return w.scaled(self.scale if scale is None else scale), rep

    def plan(self, v_tails, mu, tol=1e-12):
        """``(D, prec)`` for a certified series on vectors with these tails.

        ``mu`` is the eigenvalue of ``phase L^m`` on the vectors of interest.
        """
        if self.classification is FamilyClass.Boundary:
            return plan_series(self.shift_power, v_tails, abs(mu), tol, principal=True)
        lam = mu if self.classification is FamilyClass.Zero else self.omega - mu
        return plan_series(self.inner, v_tails, abs(1 - lam), tol)

    # dense forms (boundary only) ----------------------------------------
    def _require_boundary(self):
        if self.classification is not FamilyClass.Boundary:
            raise DomainError(
                f"{self.classification.value} members are unbounded; only vector-wise application exists"
            )

    def dense_operator(self):
        """``(i/m) Log(omega - phase L^m)`` as an upper-triangular banded operator."""
        self._require_boundary()
        ratio = self.phase / self.omega
        logw = cmath.log(self.omega)
        bands = {0: Band(self.scale * logw)}
        for k in range(1, (self.dim - 1) // self.m + 1):
            bands[self.m * k] = Band(-self.scale * ratio**k / k)
        return BandedOperator(self.dim, bands, name=f"T_{{{self.omega:g},{self.m}}}")

    def symmetric_operator(self):
        """``T + T*``, the bounded symmetric member used for the dense CCR."""
        T = self.dense_operator()
        return T + T.adjoint()


def conjugate_operator(omega, m, D):
    """``(ConjugateOperator, ConjugateFamily)`` for ``T_{omega,m}``."""
    op = ConjugateOperator(omega, m, D)
    return op, op.family


# ---------------------------------------------------------------------------
# Galapon operator and weighted variants
# ---------------------------------------------------------------------------


def galapon_operator(D):
    """Galapon time operator with entries ``i / (n - m)`` off the diagonal."""
    D = int(D)
    if D < 2:
        raise DomainError("the Galapon operator needs D >= 2")
    bands = {}
    for d in range(1, D):
        bands[d] = Band(complex(0, -1.0 / d))
        bands[-d] = Band(complex(0, 1.0 / d))
    return BandedOperator(D, bands, name="T_G")


def galapon_band_form(D):
    """The same operator assembled as ``i sum_k (1/k) (L*^k - L^k)``."""
    D = int(D)
    L = make(LeftShift(), D)
    Ls = make(RightShift(), D)
    out = BandedOperator(D, {})
    for k in range(1, D):
        out = out + (power(Ls, k) - power(L, k)).scaled(complex(0, 1.0 / k))
    out.name = "T_G(series)"
    return out


def growth_exponent(G, n_min=1):
    """Least-squares slope of ``log|G(n)|`` against ``log n`` for ``n >= n_min``."""
    G = np.asarray(G)
    n = np.arange(len(G))
    sel = n >= max(n_min, 1)
    if np.count_nonzero(sel) < 2:
        return 0.0
    x = np.log(n[sel])
    y = np.log(np.abs(G[sel]))
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def weighted_galapon(g, D, symmetrize=False):
    """Weighted Galapon operator ``L_g = i{log(1 - g_N L) - log(1 - L* g_N^{-1})}``.

    With ``G(n) = prod_{k<n} g(k)`` the entries are
    ``(L_g)[n, m] = i/(n - m) * G(m)/G(n)``, i.e. ``L_g = V^{-1} T_G V`` for
    ``V = diag(G)``.  The symmetrized operator is ``(L_g + L_g*) / 2``,
    which equals ``(L_g + L_{1/conj(g)}) / 2``.

    Parameters
    ----------
    g : callable
        Nonzero weight ``g(n)``.
    D : int
    symmetrize : bool
        Return the symmetric combination.  The growth of ``|G(n)|`` is then
        fitted to ``n**s`` and a :class:`GrowthConditionWarning` is issued
        when ``|s| >= 1/2``.

    Raises
    ------
    DomainError
        If ``g`` vanishes on ``[0, D)``.
    """
    D = int(D)
    G = cumulative_weights(g, D)
    gv = np.array([complex(g(n)) for n in range(D)])
    if np.any(gv == 0):
        raise DomainError(f"weight vanishes at n={int(np.flatnonzero(gv == 0)[0])}")
    n = np.arange(D)
    diff = n[:, None] - n[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        M = np.where(diff != 0, 1j / np.where(diff == 0, 1, diff), 0.0)
    M = M * (G[None, :] / G[:, None])
    info = {}
    if symmetrize:
        M = 0.5 * (M + M.conj().T)
        s = growth_exponent(G)
        info["growth_exponent"] = s
        info["growth_ok"] = abs(s) < 0.5
        if not abs(s) < 0.5:
            warnings.warn(
                f"|G(n)| grows like n^{s:.3f}; the growth condition needs |s| < 1/2",
                GrowthConditionWarning,
                stacklevel=2,
            )
    op = BandedOperator.from_dense(M, name="L_g_sym" if symmetrize else "L_g")
    op.info.update(info)
    op.info["cumulative_weights"] = G
    return op


def unitary_gauge_check(g, D):
    """Deviations for unimodular ``g``: ``V* L V`` vs ``g_N L`` and ``V* T_G V`` vs ``L_g``.

    Returns
    -------
    dict
        ``shift_deviation`` and ``galapon_deviation`` (max entrywise).
    """
    D = int(D)
    G = cumulative_weights(g, D)
    gv = np.array([complex(g(n)) for n in range(D)])
    if np.max(np.abs(np.abs(gv) - 1.0)) > 1e-12:
        raise PreconditionError("the unitary gauge needs |g(n)| = 1")
    V = np.diag(G)
    Vh = V.conj().T
    Lm = make(LeftShift(), D).to_dense()
    gL = np.diag(gv) @ Lm
    dev_shift = float(np.max(np.abs(Vh @ Lm @ V - gL)))
    TG = galapon_operator(D).to_dense()
    Lg = weighted_galapon(g, D).to_dense()
    dev_gal = float(np.max(np.abs(Vh @ TG @ V - Lg)))
    return {"shift_deviation": dev_shift, "galapon_deviation": dev_gal}


# ---------------------------------------------------------------------------
# polynomial operators X_p
# ---------------------------------------------------------------------------


def _cluster_roots(roots, coeffs_desc, tol=1e-5):
    """Group nearly equal roots, average them and polish by Newton steps."""
    roots = list(roots)
    groups = []
    for z in roots:
        for grp in groups:
            if abs(grp[0] - z) < tol:
                grp.append(z)
                break
        else:
            groups.append([z])
    poly = np.poly1d(coeffs_desc)
    out = []
    for grp in groups:
        mult = len(grp)
        z = complex(np.mean(grp))
        target = poly.deriv(mult - 1) if mult > 1 else poly
        dtarget = target.deriv()
        for _ in range(50):
            dz = dtarget(z)
            if dz == 0:
                break
            step = target(z) / dz
            z -= step
            if abs(step) < 1e-17:
                break
        out.extend([z] * mult)
    return out


@dataclass(frozen=True)
class PolySpec:
    """Polynomial ``p(z) = sum_j coefficients[j] z^j``.

    ``roots_of_one_minus_p`` lists the zeros of ``1 - p`` with multiplicity.
    """

    coefficients: tuple

    def __post_init__(self):
        c = tuple(complex(x) for x in self.coefficients)
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        if len(c) < 2:
            raise DomainError("p must have degree at least one")
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def monomial(cls, omega, m):
        """``p(z) = omega z^m``."""
        return cls(tuple([0] * int(m) + [complex(omega)]))

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def __call__(self, z):
        return np.polyval(self.coefficients[::-1], z)

    @property
    def one_minus_p(self):
        """Ascending coefficients of ``1 - p``."""
        q = [-c for c in self.coefficients]
        q[0] += 1
        return tuple(q)

    @property
    def roots_of_one_minus_p(self):
        desc = list(self.one_minus_p)[::-1]
        return tuple(_cluster_roots(np.roots(desc), desc))


class PolyTimeContext:
    """``X_p = log(1 - p(L)) - log(1 - p(L)*)`` on a truncation.

    The logarithm is expanded through the roots ``alpha_i`` of ``1 - p``:
    ``log(1 - p(z)) = log q0 + sum_j l_j z^j`` with ``q0 = 1 - p(0)`` and
    ``l_j = -(1/j) sum_i alpha_i^(-j)``.
    """

    def __init__(self, p, D):
        self.p = p if isinstance(p, PolySpec) else PolySpec(tuple(p))
        self.dim = int(D)
        self.m = self.p.degree
        roots = self.p.roots_of_one_minus_p
        self.roots = roots
        q = self.p.one_minus_p
        for a in roots:
            if abs(abs(a) - 1.0) > 1e-10:
                raise HypothesisError(f"root {a:.6g} of 1 - p is off the unit circle (|alpha| = {abs(a):.12g})")
            val = abs(np.polyval(q[::-1], a))
            if val > 1e-10:
                raise HypothesisError(f"root {a:.6g} leaves |1 - p(alpha)| = {val:.3g}")
        self.q0 = complex(q[0])
        self.p0 = complex(self.p.coefficients[0])

    @property
    def distinct_roots(self):
        out = []
        for a in self.roots:
            if not any(abs(a - b) < 1e-9 for b in out):
                out.append(a)
        return out

    def log_coefficients(self, J=None):
        """``l_j`` for ``j = 1..J`` (default ``J = D - 1``) from the roots."""
        J = self.dim - 1 if J is None else int(J)
        j = np.arange(1, J + 1)
        inv = np.array([1 / a for a in self.roots])
        return -np.sum(inv[:, None] ** j[None, :], axis=0) / j

    def log_coefficients_recurrence(self, J):
        """``l_j`` from ``j l_j q0 = j q_j - sum_{i<j} i l_i q_{j-i}`` (cross-check)."""
        q = list(self.one_minus_p_padded(J))
        ell = np.zeros(J + 1, dtype=complex)
        for j in range(1, J + 1):
            acc = j * q[j]
            for i in range(1, j):
                acc -= i * ell[i] * q[j - i]
            ell[j] = acc / (j * q[0])
        return ell[1:]

    def one_minus_p_padded(self, J):
        q = list(self.p.one_minus_p)
        return q + [0j] * max(0, J + 1 - len(q))

    def operator(self):
        """Dense banded ``X_p`` on the truncation."""
        ell = self.log_coefficients()
        logq = cmath.log(self.q0)
        bands = {0: Band(logq - logq.conjugate())}
        for j, c in enumerate(ell, start=1):
            if c != 0:
                bands[j] = Band(complex(c))
                bands[-j] = Band(-complex(c).conjugate())
        return BandedOperator(self.dim, bands, name="X_p")

    def time_operator(self):
        """``(i/m) X_p``."""
        return self.operator().scaled(1j / self.m)

    def forward_identities(self, psi):
        """Max residuals of the forward identities for each distinct root.

        For ``alpha`` on the unit circle checks
        ``(alpha - L)(L* psi) = (alpha L* - 1) psi`` and
        ``(1/alpha - L*)(-alpha psi) = (alpha L* - 1) psi``.
        """
        D = self.dim
        if psi.dim != D:
            raise DomainError("psi has the wrong dimension")
        if psi.support_max() + 1 >= D:
            raise DomainError("psi must leave room for one raising step")
        L = make(LeftShift(), D)
        Ls = make(RightShift(), D)
        out = []
        for a in self.distinct_roots:
            target = apply(Ls, psi).scaled(a) - psi
            lhs1 = apply(Ls, psi).scaled(a) - apply(L, apply(Ls, psi))
            x = psi.scaled(-a)
            lhs2 = x.scaled(1 / a) - apply(Ls, x)
            out.append(
                {
                    "root": a,
                    "first": float(np.max(np.abs((lhs1 - target).coeffs))),
                    "second": float(np.max(np.abs((lhs2 - target).coeffs))),
                }
            )
        return out

    def domain_vector(self, psi):
        """``phi = prod_i (alpha_i L* - 1) psi``; ``[N, X_p] phi = -m phi``."""
        if psi.support_max() + self.m >= self.dim:
            raise DomainError("psi support too large for the truncation")
        Ls = make(RightShift(), self.dim)
        phi = psi
        for a in self.roots:
            phi = apply(Ls, phi).scaled(a) - phi
        return phi

    def random_psi(self, seed, support=None):
        """Seeded complex Gaussian ``psi`` with room for the domain factors."""
        s = (self.dim // 2 - self.m) if support is None else int(support)
        if s < 1:
            raise DomainError("truncation too small for a domain vector")
        rng = make_rng(seed)
        c = np.zeros(self.dim, dtype=complex)
        c[:s] = rng.standard_normal(s) + 1j * rng.standard_normal(s)
        c /= np.linalg.norm(c)
        return FockVector(c, TailBound(s, 0.0, 0.0))


def poly_time_operator(p, D):
    """Context for ``X_p``; raises :class:`HypothesisError` for roots off the circle."""
    return PolyTimeContext(p, D)


# ---------------------------------------------------------------------------
# angle operators
# ---------------------------------------------------------------------------


class AngleVariant(enum.Enum):
    S0 = "S0"
    S1 = "S1"


def _s0_weight(n):
    return gmpy2.sqrt(gmpy2.mpfr(n + 2) / (n + 1))


def _s1_weight(n):
    return gmpy2.sqrt(gmpy2.mpfr(n + 1) / (n + 2))


class AngleContext:
    """Inner operator ``g_{N+2} L^2`` of an angle operator and its eigenvectors.

    ``S0`` uses ``sqrt((N+2)/(N+1)) L^2`` with eigenvectors
    ``exp(beta a*^2/2) Omega`` (eigenvalue ``beta``); ``S1`` uses
    ``sqrt((N+1)/(N+2)) L^2`` with eigenvectors ``a* exp(beta a*^2/2) Omega``.
    The angle operator is ``(i/2) log`` of the inner operator.
    """

    def __init__(self, variant, D):
        self.variant = AngleVariant(variant) if not isinstance(variant, AngleVariant) else variant
        self.dim = int(D)
        if self.dim < 4:
            raise DomainError("angle operators need D >= 4")
        if self.variant is AngleVariant.S0:
            weight, G, self.parity = _s0_weight, math.sqrt(2.0), 0
            vec = lambda r: np.sqrt((r + 2.0) / (r + 1.0)).astype(complex)
        else:
            weight, G, self.parity = _s1_weight, 1.0, 1
            vec = lambda r: np.sqrt((r + 1.0) / (r + 2.0)).astype(complex)
        band = Band(scalar=weight, vector=vec, growth=(G, 0.0))
        W = BandedOperator(self.dim, {0: band})
        self.inner = compose(W, power(make(LeftShift(), self.dim), 2))
        self.inner.name = f"{self.variant.value}_inner"
        self.scale = 0.5j

    def with_dim(self, D):
        return AngleContext(self.variant, D)

    def family_vector(self, beta, n, D=None, *, prec=None):
        """``a*^(2n + parity) exp(beta a*^2/2) Omega``; ``n = 0`` is the eigenvector."""
        return super_coherent_vector(beta, 2 * int(n) + self.parity, self.dim if D is None else D, prec=prec)

    def eigenvector(self, beta, D=None, *, prec=None):
        return self.family_vector(beta, 0, D, prec=prec)

    def log_apply(self, v, policy=None):
        return series_apply("Log", self.inner, v, policy)

    def apply(self, v, policy=None):
        w, rep = self.log_apply(v, policy)
        return w.scaled(self.scale), rep

    def plan(self, beta, n=0, tol=1e-12):
        """``(D, prec)`` for certified series on the family vector and ``N`` times it."""
        probe = self.family_vector(beta, n, 64)
        tails = _tails(probe, [make(Number(), 64)])
        return plan_series(self.inner, tails, abs(1 - beta), tol)


def angle_operator(variant, D):
    """Context for the angle operator ``S0`` or ``S1``."""
    return AngleContext(variant, D)


@dataclass(frozen=True)
class OddSector:
    """Odd-sector data ``(h, g, f, beta)``: family ``h_N L* (f_N L*^2)^n xi_{alpha,f}``.

    ``h`` must be bounded away from zero (``h_min``) on ``n >= 1``.
    """

    h: Callable
    g: Callable
    f: Callable
    beta: complex
    h_min: float = 1.0

    def reduced_weight(self):
        """Even-type weight ``n -> h(n-1)^{-1} g(n+1) h(n+1)`` used in the pairing."""
        h, g = self.h, self.g

        def w(n):
            if n < 1:
                return g(n + 1) * h(n + 1)
            return g(n + 1) * h(n + 1) / h(n - 1)

        return w


@dataclass(frozen=True)
class AnglePairing:
    """Pairing ``(f, g, beta)`` with ``g(n+2) f(n+2) - g(n) f(n) [n >= 2] = beta`` on even ``n``.

    ``radius`` is ``M_f = lim n / |f(2n)|``; leave ``None`` to estimate it.
    ``f_growth`` optionally gives ``(G, p)`` with ``|f(n)| <= G (n+1)^p``.
    """

    f: Callable
    g: Callable
    beta: complex
    radius: Optional[float] = None
    f_growth: Optional[tuple] = None

    def admissible(self, alpha, radius=None):
        """``|1 - alpha beta| < 1`` and ``|alpha| < M_f``."""
        M = self.radius if radius is None else radius
        if M is None:
            M = estimate_radius(self.f)[0]
        return abs(1 - complex(alpha) * complex(self.beta)) < 1 and abs(alpha) < M


def estimate_radius(f, J=14):
    """Estimate ``M_f = lim n/|f(2n)|`` from the dyadic ladder ``n = 2^j``.

    The last two ladder values are combined by Richardson extrapolation.
    Returns ``(M_f, growth)`` where ``growth`` is the fitted exponent of the
    ladder; ``M_f`` is infinite when the ladder grows (exponent above 0.25)
    and zero when the extrapolation falls below 1e-12.
    """
    ns = 2 ** np.arange(4, J + 1)
    vals = np.array([n / abs(complex(f(2 * int(n)))) for n in ns])
    slope = float(np.polyfit(np.log(ns[-5:]), np.log(vals[-5:]), 1)[0])
    if slope > 0.25:
        return math.inf, slope
    est = 2 * vals[-1] - vals[-2]
    if est < 1e-12 or slope < -0.25:
        return 0.0, slope
    return float(est), slope


@dataclass(frozen=True)
class PairingReport:
    passed: bool
    first_failure: Optional[int]
    max_deviation: float
    beta: complex
    radius: float
    radius_growth: float
    n_max: int

    @property
    def region_empty(self):
        return self.radius == 0.0

    def admissible(self, alpha):
        return abs(1 - complex(alpha) * self.beta) < 1 and abs(alpha) < self.radius

    def to_dict(self):
        return {
            "passed": self.passed,
            "first_failure": self.first_failure,
            "max_deviation": self.max_deviation,
            "beta": [self.beta.real, self.beta.imag],
            "radius": self.radius if math.isfinite(self.radius) else "inf",
            "region_empty": self.region_empty,
            "n_max": self.n_max,
        }


def pairing_check(pair, n_max, tol=1e-12):
    """Check the pairing identity on even ``n <= n_max`` and estimate ``M_f``."""
    beta = complex(pair.beta)
    worst = 0.0
    first = None
    for n in range(0, int(n_max) + 1, 2):
        val = complex(pair.g(n + 2)) * complex(pair.f(n + 2))
        if n >= 2:
            val -= complex(pair.g(n)) * complex(pair.f(n))
        dev = abs(val - beta)
        worst = max(worst, dev)
        if dev > tol * max(1.0, abs(beta)) and first is None:
            first = n
    if pair.radius is not None:
        M, s = float(pair.radius), 0.0
    else:
        M, s = estimate_radius(pair.f)
    return PairingReport(first is None, first, worst, beta, M, s, int(n_max))


def _fit_growth(f, n_max=4096):
    """Heuristic ``(G, p)`` with ``|f(n)| <= G (n+1)^p`` from samples, doubled for safety."""
    n = np.unique(np.geomspace(1, n_max, 64).astype(int))
    vals = np.array([abs(complex(f(int(k)))) for k in n])
    vals = np.maximum(vals, 1e-300)
    p = max(0.0, float(np.polyfit(np.log(n + 1.0), np.log(vals), 1)[0]))
    p = math.ceil(p * 4 - 1e-9) / 4
    extra = np.array([abs(complex(f(k))) for k in range(0, 64)])
    ratio = max(
        float(np.max(vals / (n + 1.0) ** p)),
        float(np.max(extra / (np.arange(64) + 1.0) ** p)),
    )
    return (2.0 * ratio, p)


class GeneralAngleContext:
    """Angle-type operator built from a pairing.

    Even sector: inner ``g_{N+2} L^2`` with family ``(f_N L*^2)^n xi_{alpha,f}``
    and eigenvalue ``alpha beta`` on ``n = 0``.  Odd sector (optional):
    inner ``g~_{N+2} L^2`` with family ``h~_N L* (f~_N L*^2)^n xi_{alpha,f~}``.
    The expected commutator eigenvalue of ``[N, log(inner)]`` is ``-2``.
    """

    def __init__(self, pair, D, odd=None):
        self.pair = pair
        self.odd = odd
        self.dim = int(D)
        self.expected_log_eigenvalue = -2.0
        self.scale = 0.5j
        self._f_growth = pair.f_growth or _fit_growth(pair.f)
        self._g_growth = _fit_growth(pair.g)
        if odd is not None:
            self._fo_growth = _fit_growth(odd.f)
            self._go_growth = _fit_growth(odd.g)
            self._h_growth = _fit_growth(odd.h)

    def with_dim(self, D):
        return GeneralAngleContext(self.pair, D, self.odd)

    def _weighted_shift(self, w, growth, D, shift, power_k, raising):
        band = Band(scalar=lambda n: w(n + shift), growth=growth)
        W = BandedOperator(D, {0: band})
        S = make(RightShift() if raising else LeftShift(), D)
        return compose(W, power(S, power_k))

    def inner(self, sector=0, D=None):
        D = self.dim if D is None else int(D)
        if sector == 0:
            g, gr = self.pair.g, self._g_growth
        else:
            self._need_odd()
            g, gr = self.odd.g, self._go_growth
        # growth of g(n+2) relative to (n+1): shift costs a factor 3^p at most
        grow = (gr[0] * 3.0 ** gr[1], gr[1])
        op = self._weighted_shift(g, grow, D, 2, 2, False)
        op.name = f"inner[{sector}]"
        return op

    def _need_odd(self):
        if self.odd is None:
            raise DomainError("no odd sector was supplied")

    def creation(self, sector=0, D=None):
        """``f_N L*^2`` (or ``f~_N L*^2``)."""
        D = self.dim if D is None else int(D)
        f, gr = (self.pair.f, self._f_growth) if sector == 0 else (self.odd.f, self._fo_growth)
        return self._weighted_shift(f, gr, D, 0, 2, True)

    def eigenvalue(self, alpha, sector=0):
        beta = self.pair.beta if sector == 0 else self.odd.beta
        return complex(alpha) * complex(beta)

    def family_vector(self, alpha, n, sector=0, D=None, *, prec=None):
        D = self.dim if D is None else int(D)
        f = self.pair.f if sector == 0 else self.odd.f
        v = generalized_eigen_vector(f, 2, alpha, D, prec=prec)
        X = self.creation(sector, D)
        for _ in range(int(n)):
            v = apply(X, v)
        if sector == 1:
            h = self.odd.h
            hop = BandedOperator(D, {0: Band(scalar=h, growth=self._h_growth)})
            v = apply(compose(hop, make(RightShift(), D)), v)
        return v

    def log_apply(self, v, sector=0, policy=None):
        return series_apply("Log", self.inner(sector, v.dim), v, policy)

    def apply(self, v, sector=0, policy=None):
        w, rep = self.log_apply(v, sector, policy)
        return w.scaled(self.scale), rep


def general_angle_builder(pair, D, odd=None, *, n_max=None):
    """Context for a paired angle operator after checking the pairing.

    Raises
    ------
    PairingError
        Carrying the first failing ``n`` for either sector.
    """
    n_max = int(D) if n_max is None else int(n_max)
    rep = pairing_check(pair, n_max)
    if not rep.passed:
        raise PairingError(f"pairing identity fails at n={rep.first_failure}", rep.first_failure)
    if odd is not None:
        reduced = AnglePairing(odd.f, odd.reduced_weight(), odd.beta)
        rep_odd = pairing_check(reduced, n_max)
        if not rep_odd.passed:
            raise PairingError(f"odd-sector pairing fails at n={rep_odd.first_failure}", rep_odd.first_failure)
    return GeneralAngleContext(pair, D, odd)


# ---------------------------------------------------------------------------
# reduction identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReductionReport:
    discrepancy: float
    lhs_norm: float
    rhs_norm: float
    dim: int
    prec: int
    converged: bool

    def passed(self, tol=1e-9):
        return self.converged and self.discrepancy <= tol


def _sampled_band_norm(A):
    """Row-wise sum of band maxima on the truncation (finite even for unbounded A)."""
    return sum(float(np.max(np.abs(A.band_values(d)))) for d in A.bands if A.band_values(d).size)


def reduction_identity_check(f, g, k, alpha, D=None, *, tol=1e-12, prec=None):
    """Compare ``log(g_{N+k} L^k) xi_{alpha,f}`` with ``f!_k(N) log((N+k) L^k) exp(alpha L*^k) Omega``.

    Both sides are evaluated by the log series in extended precision.

    Parameters
    ----------
    f, g : callable
        With ``f(n) g(n) = n``; checked on ``n < D``.
    k : int
    alpha : complex
        ``|k alpha| < 1`` and ``|1 - k alpha| < 1``.
    D : int, optional
        Truncation; chosen from the tail certificates when omitted.

    Raises
    ------
    PreconditionError
        If ``f(n) g(n) != n`` somewhere or ``alpha`` is outside the
        convergence region.
    """
    k = int(k)
    alpha = complex(alpha)
    mu = k * alpha
    if not (abs(mu) < 1 and abs(1 - mu) < 1):
        raise PreconditionError("need |k alpha| < 1 and |1 - k alpha| < 1")
    K = int(math.ceil(math.log(tol * (1 - abs(1 - mu))) / math.log(abs(1 - mu)))) + 8
    if D is None:
        # The inner operators are unbounded, so the discarded tail is
        # amplified by up to (1 + D + k)^K; rows below D - k K never see it.
        probe = generalized_eigen_vector(lambda n: 1, k, alpha, 64)
        probe_f = generalized_eigen_vector(f, k, alpha, 64)
        D = max(64, 2 * k * (K + 2))
        while True:
            mass = max(probe.tail.mass(D), probe_f.tail.mass(D))
            if mass == 0.0 or math.log(mass) + K * math.log(1 + D + k) < math.log(tol) - 8:
                break
            D += 16
    D = int(D)
    for n in range(D + k + 1):
        if abs(complex(f(n)) * complex(g(n)) - n) > 1e-12 * max(1, n):
            raise PreconditionError(f"f(n) g(n) != n at n={n}")
    b_lhs = 1 + _sampled_band_norm(_kshift(g, k, D))
    b_rhs = 1 + D + k
    if prec is None:
        prec = _hp.required_precision(K * math.log2(max(b_lhs, b_rhs)), tol)
    lhs_op = _kshift(g, k, D)
    rhs_op = _kshift(lambda n: n, k, D)
    xi_f = generalized_eigen_vector(f, k, alpha, D, prec=prec)
    xi_1 = generalized_eigen_vector(lambda n: 1, k, alpha, D, prec=prec)
    pol = SeriesPolicy(tol=tol)
    lhs, r1 = series_apply("Log", lhs_op, xi_f, pol)
    rhs, r2 = series_apply("Log", rhs_op, xi_1, pol)
    rhs = apply(make(FactorialWeight(f, k), D), rhs)
    # compare away from the truncation edge, where the kept rows are exact
    cut = D - k * (K + 1)
    diff = (lhs - rhs).coeffs
    lim = max(cut, D // 2)
    disc = float(np.linalg.norm(diff[:lim]))
    return ReductionReport(disc, lhs.norm(), rhs.norm(), D, prec, r1.converged and r2.converged)


def _kshift(g, k, D):
    """``g_{N+k} L^k``."""
    band = Band(scalar=lambda n: g(n + k))
    return BandedOperator(D, {k: band}, name=f"g_(N+{k})L^{k}")


# ---------------------------------------------------------------------------
# open-disc root solver and exterior diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootSet:
    """Roots ``alpha_k`` of ``-(c+m) z^m + c omega = 0`` with admissibility flags."""

    omega: complex
    m: int
    c: complex
    roots: tuple
    admissible: tuple

    def admissible_roots(self):
        return [a for a, ok in zip(self.roots, self.admissible) if ok]

    def to_dict(self):
        return {
            "omega": [self.omega.real, self.omega.imag],
            "m": self.m,
            "c": [self.c.real, self.c.imag],
            "roots": [[a.real, a.imag] for a in self.roots],
            "admissible": list(self.admissible),
        }


def _admissible(alpha, omega, m):
    return abs(alpha) < 1 and abs(1 - omega + alpha**m) < 1


def finite_ccr_root_solver(omega, m, c, *, require_open_disc=True):
    """Eigen-parameters of the finite CCR domain of ``-(i/c) log(omega - L^m)``.

    The CCR holds on the geometric vector ``(1, alpha, alpha^2, ...)`` when
    ``alpha^m = c omega / (c + m)``.  Roots use the principal ``m``-th root
    times ``e^{2 pi i k/m}``.

    Raises
    ------
    DegenerateEquationError
        If ``c = -m``.
    DomainError
        If ``c = 0`` or ``omega`` is not in the punctured open disc.
    """
    omega = complex(omega)
    m = int(m)
    c = complex(c)
    if c == 0:
        raise DomainError("c must be nonzero")
    if abs(c + m) == 0:
        raise DegenerateEquationError("c = -m makes the leading coefficient vanish")
    if require_open_disc and not (0 < abs(omega) < 1):
        raise DomainError("omega must lie in the punctured open unit disc")
    w = c * omega / (c + m)
    base = cmath.exp(cmath.log(w) / m) if w != 0 else 0j
    roots = tuple(base * cmath.exp(2j * math.pi * j / m) for j in range(m))
    adm = tuple(_admissible(a, omega, m) for a in roots)
    return RootSet(omega, m, c, roots, adm)


def ccr_polynomial_roots(p, c):
    """Roots of ``alpha p'(alpha) + c p(alpha) = 0`` for ascending coefficients ``p``."""
    p = np.asarray(p, dtype=complex)
    j = np.arange(len(p))
    q = (j + c) * p
    while len(q) > 1 and q[-1] == 0:
        q = q[:-1]
    if len(q) < 2:
        raise DegenerateEquationError("the CCR polynomial is constant")
    return tuple(np.roots(q[::-1]))


@dataclass(frozen=True)
class ExteriorDiagnostic:
    omega: complex
    m: int
    c: complex
    radius: float
    roots: tuple
    residuals: tuple
    dense_domain_residual: float

    @property
    def solution_count(self):
        return sum(1 for r in self.residuals if r is not None and r < 1e-6)

    def to_dict(self):
        return {
            "omega": [self.omega.real, self.omega.imag],
            "m": self.m,
            "c": [self.c.real, self.c.imag],
            "radius": self.radius,
            "roots": [[a.real, a.imag] for a in self.roots],
            "residuals": list(self.residuals),
            "solutions": self.solution_count,
            "dense_domain_residual": self.dense_domain_residual,
        }


def exterior_diagnostic(omega, m, c=1.0, D=64, *, r=None, Q=256, seed=0):
    """Search for CCR vectors of ``-(i/c) log(omega - L^m)`` when ``|omega| > 1``.

    The logarithm is built by the contour integral.  Geometric eigenvectors
    solve the CCR only at the at most ``m`` roots of
    ``alpha^m = c omega/(c+m)`` inside the disc; a random dense-domain
    vector (residue-class constraint with ``omega/|omega|``) is reported for
    contrast.  The finite solution count is the numerical face of the
    absence of an infinite-dimensional CCR domain.
    """
    from .fock import ResidueClassZero, ccr_domain_sample

    omega = complex(omega)
    m = int(m)
    c = complex(c)
    if not abs(omega) > 1:
        raise DomainError("the exterior diagnostic needs |omega| > 1")
    D = int(D)
    Lm = BandedOperator(D, {m: Band(1)})
    if r is None:
        r = 0.5 * (1.0 + 1e-3 + abs(omega))
    T = dunford_log(omega, 1, Lm, r, Q).to_dense() * (-1j / c)
    N = make(Number(), D).to_dense()
    roots = finite_ccr_root_solver(omega, m, c, require_open_disc=False).roots
    res = []
    for a in roots:
        if abs(a) >= 0.95:
            res.append(None)
            continue
        v = geometric_vector(a, D).coeffs
        rr = N @ (T @ v) - T @ (N @ v) + 1j * v
        # compare on rows whose tail contribution is negligible
        res.append(float(np.linalg.norm(rr[: D // 2]) / np.linalg.norm(v)))
    phi = ccr_domain_sample(ResidueClassZero(omega / abs(omega), m), seed, D).coeffs
    rr = N @ (T @ phi) - T @ (N @ phi) + 1j * phi
    return ExteriorDiagnostic(omega, m, c, float(r), tuple(roots), tuple(res), float(np.linalg.norm(rr)))
