"""Verification engine for commutation relations.

``ccr_check`` evaluates ``N(T phi) - T(N phi) - expected phi`` with a
truncation guard and an error budget; ``ultraweak_ccr_check`` tests the
form version of the CCR for the angle operators; ``kennard_check``
evaluates the uncertainty inequality.
"""

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import DomainError, NormalizationWarning, SupportOverflowError
from .fock import FockVector
from .operators import BandedOperator, Number, apply, make

__all__ = [
    "Verdict",
    "CCRReport",
    "ccr_check",
    "as_vector_map",
    "UltraWeakForm",
    "Combination",
    "UltraWeakReport",
    "ultraweak_ccr_check",
    "KennardReport",
    "kennard_check",
    "write_reports_csv",
]


class Verdict(enum.Enum):
    Pass = "Pass"
    Fail = "Fail"
    Inconclusive = "Inconclusive"


@dataclass(frozen=True)
class CCRReport:
    """Outcome of one commutator check.

    ``truncation_budget`` bounds the part of the residual that truncation
    and series remainders can explain; ``Pass`` means
    ``residual_norm <= tolerance + truncation_budget``.
    """

    residual_norm: float
    expected_eigenvalue: complex
    domain_tag: str
    vector_id: Any
    truncation_budget: float
    verdict: Verdict
    tolerance: float
    vector_norm: float = 1.0
    explanation: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict is Verdict.Pass

    def to_dict(self):
        e = complex(self.expected_eigenvalue)
        return {
            "residual_norm": self.residual_norm,
            "expected_eigenvalue": [e.real, e.imag],
            "domain_tag": self.domain_tag,
            "vector_id": _plain(self.vector_id),
            "truncation_budget": self.truncation_budget if math.isfinite(self.truncation_budget) else "inf",
            "verdict": self.verdict.value,
            "tolerance": self.tolerance,
            "vector_norm": self.vector_norm,
            "explanation": self.explanation,
            "meta": {k: _plain(v) for k, v in self.meta.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def _plain(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.complexfloating):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (list, tuple)):
        return [_plain(y) for y in x]
    return x


def as_vector_map(T):
    """Wrap a BandedOperator or a dense matrix as ``v -> (T v, 0.0)``."""
    if isinstance(T, BandedOperator):
        return lambda v: (apply(T, v), 0.0)
    if isinstance(T, np.ndarray):
        M = T
        return lambda v: (FockVector(M @ v.coeffs, None, check=False), 0.0)
    return T


def _unpack(out):
    """Normalize a map result to ``(vector, budget)``."""
    if isinstance(out, FockVector):
        return out, math.inf
    vec, extra = out
    if isinstance(extra, (int, float)):
        return vec, float(extra)
    return vec, float(extra.budget)


def _guard(T, phi):
    """``(ok, explanation)`` for operators whose compression is exact on ``phi``."""
    D = phi.dim
    top = phi.support_max()
    if isinstance(T, np.ndarray):
        width = D
    else:
        width = T.raise_width
    if width >= D // 2:
        if top < D // 2:
            return True, ""
        return False, f"support {top} of phi must stay below D/2 = {D // 2} for a dense operator"
    if top + width < D:
        return True, ""
    return False, f"support {top} plus raising width {width} reaches D = {D}"


def ccr_check(
    T_apply,
    phi,
    expected,
    tol,
    *,
    domain_tag="",
    vector_id=None,
    budget_scale=1.0,
    N=None,
    meta=None,
):
    """Check ``[N, T] phi = expected * phi``.

    Parameters
    ----------
    T_apply : BandedOperator, ndarray or callable
        Operators are applied exactly and guarded by the support of
        ``phi``.  A callable must return ``(vector, budget)`` where
        ``budget`` is a float or a :class:`~oscitime.opfunc.SeriesReport`
        (its ``budget`` is used); a bare vector counts as uncertified.
    phi : FockVector
    expected : complex
        ``-1j`` for time operators, or another eigenvalue of the commutator.
    tol : float
    budget_scale : float
        Modulus of the scalar applied on top of the series (``1/m`` for
        ``(i/m) log``), used to scale reported series budgets.

    Returns
    -------
    CCRReport
        ``Inconclusive`` when the guard fails or no finite budget exists;
        such cases are never reported as failures.
    """
    D = phi.dim
    N = make(Number(), D) if N is None else N
    expected = complex(expected)
    meta = dict(meta or {})
    vnorm = phi.norm()
    exact_op = isinstance(T_apply, (BandedOperator, np.ndarray))
    if exact_op:
        ok, why = _guard(T_apply, phi)
        if not ok:
            return CCRReport(math.nan, expected, domain_tag, vector_id, math.inf, Verdict.Inconclusive, tol, vnorm, why, meta)
    fn = as_vector_map(T_apply)
    Nphi = apply(N, phi)
    Tphi, b1 = _unpack(fn(phi))
    TNphi, b2 = _unpack(fn(Nphi))
    r = apply(N, Tphi.without_hp()) - TNphi.without_hp() - phi.without_hp().scaled(expected)
    res = r.norm()
    if exact_op:
        budget = 0.0
    else:
        budget = budget_scale * ((D - 1) * b1 + b2)
    if not math.isfinite(budget):
        return CCRReport(
            res, expected, domain_tag, vector_id, budget, Verdict.Inconclusive, tol, vnorm,
            "no finite truncation budget (uncertified tail or unconverged series)", meta,
        )
    verdict = Verdict.Pass if res <= tol + budget else Verdict.Fail
    return CCRReport(res, expected, domain_tag, vector_id, budget, verdict, tol, vnorm, "", meta)


# ---------------------------------------------------------------------------
# ultra-weak forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Combination:
    """Finite combination ``sum c_k b_k`` of vectors registered in a form."""

    terms: tuple

    @classmethod
    def of(cls, *pairs):
        return cls(tuple((str(k), complex(c)) for k, c in pairs))


class UltraWeakForm:
    """Form ``T[phi, psi] = (1/2){(S phi, psi) + (phi, S psi)}`` with ``S`` split by parity.

    Parameters
    ----------
    even_apply, odd_apply : callable
        ``v -> (S v, report)`` on even- and odd-supported vectors.
    """

    def __init__(self, even_apply, odd_apply, name="T"):
        self.even_apply = even_apply
        self.odd_apply = odd_apply
        self.name = name
        self._basis = {}

    def S(self, v):
        """``S0`` on the even part plus ``S1`` on the odd part; returns ``(vector, budget)``."""
        out = None
        budget = 0.0
        for part, fn in ((v.even_part(), self.even_apply), (v.odd_part(), self.odd_apply)):
            if part.norm() == 0.0:
                continue
            w, b = _unpack(fn(part))
            budget += b
            out = w if out is None else out + w
        if out is None:
            out = v.scaled(0)
        return out, budget

    def value(self, phi, psi):
        Sphi, _ = self.S(phi)
        Spsi, _ = self.S(psi)
        return 0.5 * (Sphi.inner(psi) + phi.inner(Spsi))

    def register(self, key, vector, sector):
        """Cache ``b``, ``N b`` and their ``S`` images for a sector family vector.

        Raises
        ------
        DomainError
            If the vector has support outside its declared sector parity.
        """
        sector = int(sector)
        other = vector.odd_part() if sector == 0 else vector.even_part()
        if other.norm() > 0:
            raise DomainError(f"vector {key!r} has components outside sector {sector}")
        N = make(Number(), vector.dim)
        Nb = apply(N, vector)
        Sb, bud1 = self.S(vector)
        SNb, bud2 = self.S(Nb)
        self._basis[str(key)] = {
            "b": vector.without_hp(),
            "Nb": Nb.without_hp(),
            "Sb": Sb.without_hp(),
            "SNb": SNb.without_hp(),
            "budget": bud1 + bud2,
            "sector": sector,
        }

    def keys(self):
        return list(self._basis)

    def _combine(self, comb, field_name):
        out = None
        for key, c in comb.terms:
            v = self._basis[key][field_name].scaled(c)
            out = v if out is None else out + v
        return out

    def resolve(self, x):
        """``(phi, N phi, S phi, S N phi, budget)`` for a vector or a combination."""
        if isinstance(x, Combination):
            budget = sum(abs(c) * self._basis[k]["budget"] for k, c in x.terms)
            return (
                self._combine(x, "b"),
                self._combine(x, "Nb"),
                self._combine(x, "Sb"),
                self._combine(x, "SNb"),
                budget,
            )
        N = make(Number(), x.dim)
        Nx = apply(N, x)
        Sx, b1 = self.S(x)
        SNx, b2 = self.S(Nx)
        return x.without_hp(), Nx.without_hp(), Sx.without_hp(), SNx.without_hp(), b1 + b2


@dataclass(frozen=True)
class UltraWeakReport:
    defect: float
    symmetry_defect: float
    overlap: complex
    budget: float

    def passed(self, tol=1e-8):
        return self.defect <= tol and self.symmetry_defect <= 1e-12 * max(1.0, abs(self.overlap)) + 1e-12

    def to_dict(self):
        return {
            "defect": self.defect,
            "symmetry_defect": self.symmetry_defect,
            "overlap": [self.overlap.real, self.overlap.imag],
            "budget": self.budget if math.isfinite(self.budget) else "inf",
        }


def ultraweak_ccr_check(form, phi, psi):
    """``|T[N phi, psi] - conj(T[N psi, phi]) + i (phi, psi)|`` and the symmetry defect.

    ``phi`` and ``psi`` are vectors or :class:`Combination` objects of
    registered family vectors (the fast path used for batches).
    """
    p, Np, Sp, SNp, bp = form.resolve(phi)
    q, Nq, Sq, SNq, bq = form.resolve(psi)

    def T(x, Sx, y, Sy):
        return 0.5 * (Sx.inner(y) + x.inner(Sy))

    t1 = T(Np, SNp, q, Sq)
    t2 = T(Nq, SNq, p, Sp)
    overlap = p.inner(q)
    defect = abs(t1 - np.conj(t2) + 1j * overlap)
    sym = abs(T(p, Sp, q, Sq) - np.conj(T(q, Sq, p, Sp)))
    return UltraWeakReport(float(defect), float(sym), complex(overlap), bp + bq)


# ---------------------------------------------------------------------------
# Kennard inequality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KennardReport:
    sigma_A: float
    sigma_B: float
    mean_A: complex
    mean_B: complex
    commutator_expectation: complex
    slack: float
    verdict: Verdict

    @property
    def passed(self):
        return self.verdict is Verdict.Pass

    def to_dict(self):
        c = self.commutator_expectation
        return {
            "sigma_A": self.sigma_A,
            "sigma_B": self.sigma_B,
            "commutator_expectation": [c.real, c.imag],
            "slack": self.slack,
            "verdict": self.verdict.value,
        }


def kennard_check(A, B_apply, psi, *, slack_tol=1e-10):
    """Evaluate ``sigma_A sigma_B - |<[A, B]>|/2`` for a unit vector ``psi``.

    ``sigma_X = ||X psi - <X> psi||``.  A non-unit ``psi`` is normalized with
    a :class:`NormalizationWarning`.

    Raises
    ------
    SupportOverflowError
        If ``A`` and ``B`` (when banded) could push ``psi`` past the
        truncation edge.
    """
    nrm = psi.norm()
    if abs(nrm - 1.0) > 1e-12:
        warnings.warn(f"psi has norm {nrm:.6g}; normalizing", NormalizationWarning, stacklevel=2)
        psi = psi.normalized()
    psi = psi.without_hp()
    fa = as_vector_map(A)
    fb = as_vector_map(B_apply)
    widths = [X.raise_width for X in (A, B_apply) if isinstance(X, BandedOperator) and X.raise_width < psi.dim // 2]
    if psi.support_max() + sum(widths) >= psi.dim:
        raise SupportOverflowError("psi support plus raising widths reaches the truncation edge")
    Apsi, _ = _unpack(fa(psi))
    Bpsi, _ = _unpack(fb(psi))
    mA = psi.inner(Apsi)
    mB = psi.inner(Bpsi)
    sA = (Apsi - psi.scaled(mA)).norm()
    sB = (Bpsi - psi.scaled(mB)).norm()
    ABpsi, _ = _unpack(fa(Bpsi))
    BApsi, _ = _unpack(fb(Apsi))
    comm = psi.inner(ABpsi) - psi.inner(BApsi)
    slack = sA * sB - 0.5 * abs(comm)
    verdict = Verdict.Pass if slack >= -slack_tol else Verdict.Fail
    return KennardReport(float(sA), float(sB), complex(mA), complex(mB), complex(comm), float(slack), verdict)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_reports_csv(path, reports):
    """Write CCR reports with columns ``family, omega, m, param, residual, budget, verdict``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "omega", "m", "param", "residual", "budget", "verdict"])
        for r in reports:
            meta = r.meta
            param = meta.get("param", r.vector_id)
            w.writerow(
                [
                    meta.get("family", r.domain_tag),
                    _fmt(meta.get("omega", "")),
                    meta.get("m", ""),
                    _fmt(param),
                    repr(float(r.residual_norm)),
                    repr(float(r.truncation_budget)),
                    r.verdict.value,
                ]
            )


def _fmt(x):
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        return f"{x.real!r}{x.imag:+}j" if x.imag else repr(x.real)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)
