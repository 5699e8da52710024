"""Heisenberg evolution ``T(t) = e^{itN} T e^{-itN}`` of the conjugate families.

``e^{itN}`` is the exact diagonal phase ``diag(e^{itn})``.  Conjugating a
shift power gives ``e^{itN} L^m e^{-itN} = e^{-itm} L^m``, so the evolved
family member is ``(i/m) log(omega - e^{-itm} L^m)`` and the evolution is
periodic with period ``2 pi / m``.
"""

import cmath
import csv
import math
from dataclasses import dataclass

import numpy as np

from .conjugates import AngleContext, ConjugateOperator, FamilyClass, galapon_operator
from .errors import DomainError
from .fock import FockVector

__all__ = [
    "EvolutionParams",
    "EvolutionContext",
    "evolve",
    "phase_diagonal",
    "galapon_evolved",
    "PeriodicityReport",
    "periodicity_check",
    "angle_periodicity_check",
    "WeakWeylReport",
    "weak_weyl_failure_probe",
    "write_period_sweep_csv",
]


@dataclass(frozen=True)
class EvolutionParams:
    t: float
    omega: complex
    m: int

    def shifted(self, dt):
        return EvolutionParams(self.t + dt, self.omega, self.m)

    @property
    def period(self):
        return 2 * math.pi / self.m


def phase_diagonal(t, D):
    """Diagonal of ``e^{itN}``."""
    return np.exp(1j * float(t) * np.arange(int(D)))


def _conj_by_phases(M, t):
    u = phase_diagonal(t, M.shape[0])
    return (u[:, None] * M) * u.conj()[None, :]


def _phase_vector(v, t, sign):
    """``e^{sign i t N} v`` on doubles (and extended precision when present)."""
    u = phase_diagonal(sign * t, v.dim)
    if v.hp is None:
        return FockVector(v.coeffs * u, v.tail, check=False)
    from . import _hp

    with _hp.working_precision(v.prec):
        import gmpy2

        n = np.arange(v.dim)
        tt = _hp.to_mpc(sign * t).real
        ph = np.array([gmpy2.exp(gmpy2.mpc(0, tt * int(k))) for k in n], dtype=object)
        hp = v.hp * ph
    return FockVector(None, v.tail, hp=hp, prec=v.prec, check=False)


class EvolutionContext:
    """Both constructions of ``T_{omega,m}(t)`` on a truncation.

    ``conjugated_*`` uses ``e^{itN} T e^{-itN}``; ``direct_*`` uses the
    family member with ``L^m`` replaced by ``e^{-itm} L^m``.
    """

    def __init__(self, params, D):
        self.params = params
        self.dim = int(D)
        self.base = ConjugateOperator(params.omega, params.m, D)
        self.direct = ConjugateOperator(
            params.omega, params.m, D, phase=cmath.exp(-1j * params.t * params.m)
        )

    @property
    def classification(self):
        return self.base.classification

    def conjugated_dense(self, symmetric=False):
        T = self.base.symmetric_operator() if symmetric else self.base.dense_operator()
        return _conj_by_phases(np.array(T.to_dense()), self.params.t)

    def direct_dense(self, symmetric=False):
        T = self.direct.symmetric_operator() if symmetric else self.direct.dense_operator()
        return np.array(T.to_dense())

    def dense_deviation(self, symmetric=False):
        """Max entrywise difference between the two constructions."""
        return float(np.max(np.abs(self.conjugated_dense(symmetric) - self.direct_dense(symmetric))))

    def conjugated_apply(self, v, policy=None):
        """``e^{itN} T e^{-itN} v`` via the series of the unevolved member."""
        w, rep = self.base.apply(_phase_vector(v, self.params.t, -1), policy)
        return _phase_vector(w, self.params.t, 1), rep

    def direct_apply(self, v, policy=None):
        return self.direct.apply(v, policy)


def evolve(params, D):
    """Evolution context for ``T_{omega,m}(t)``; ``|omega| <= 1`` is required."""
    return EvolutionContext(params, D)


def galapon_evolved(t, D):
    """``e^{itN} T_G e^{-itN}`` with entries ``e^{it(n-m)} i/(n-m)``."""
    return _conj_by_phases(np.array(galapon_operator(D).to_dense()), t)


@dataclass(frozen=True)
class PeriodicityReport:
    params: EvolutionParams
    deviation: float
    tol: float
    mode: str

    @property
    def passed(self):
        return self.deviation <= self.tol

    def to_row(self):
        w = complex(self.params.omega)
        return [w, self.params.m, self.params.t, self.deviation]


def periodicity_check(params, D, *, vector=None, tol=1e-12, symmetric=True, policy=None):
    """Deviation between ``T(t)`` and ``T(t + 2 pi/m)``.

    Boundary members are compared as dense matrices.  Unbounded members
    need an admissible ``vector`` and are compared vector-wise through the
    direct series.
    """
    a = EvolutionContext(params, D)
    b = EvolutionContext(params.shifted(params.period), D)
    if a.classification is FamilyClass.Boundary and vector is None:
        dev = float(np.max(np.abs(a.conjugated_dense(symmetric) - b.conjugated_dense(symmetric))))
        return PeriodicityReport(params, dev, tol, "dense")
    if vector is None:
        raise DomainError("unbounded families are compared vector-wise; pass an admissible vector")
    wa, _ = a.direct_apply(vector, policy)
    wb, _ = b.direct_apply(vector, policy)
    dev = float(np.max(np.abs((wa - wb).coeffs)))
    return PeriodicityReport(params, dev, tol, "vector")


def angle_periodicity_check(variant, beta, t, *, tol=1e-12, policy=None):
    """Period-``pi`` check of the evolved angle operator on its eigenvector.

    ``e^{itN} (g_{N+2} L^2) e^{-itN} = e^{-2it} g_{N+2} L^2``, so the
    eigenvector ``v`` of the angle family (eigenvalue ``beta``) is an
    eigenvector of the evolved inner operator with eigenvalue
    ``mu = beta e^{-2it}``.  ``(i/2) log(e^{-2it} g_{N+2} L^2) v`` is
    evaluated at ``t`` and ``t + pi`` and compared with each other, with
    the conjugated construction ``e^{itN} S e^{-itN} v`` and with
    ``(i/2) log(mu) v``.  Truncation and precision are planned from
    ``|1 - mu|``.

    Returns
    -------
    dict
        ``period_deviation``, ``construction_deviation``,
        ``eigen_residual``, ``dim``, ``prec`` and ``passed``.
    """
    from .conjugates import _tails, plan_series
    from .operators import Number, make
    from .opfunc import series_apply

    mu = beta * cmath.exp(-2j * t)
    if not abs(1 - mu) < 1 or not abs(1 - beta) < 1:
        raise DomainError("the evolved eigenvalue leaves the convergence disc |1 - mu| < 1")
    probe = AngleContext(variant, 64)
    v64 = probe.eigenvector(beta)
    q = max(abs(1 - mu), abs(1 - beta))
    D, prec = plan_series(probe.inner, _tails(v64, [make(Number(), 64)]), q, tol)
    ctx = AngleContext(variant, D)
    v = ctx.eigenvector(beta, prec=prec)

    def direct(tt):
        w, _ = series_apply("Log", ctx.inner.scaled(cmath.exp(-2j * tt)), v, policy)
        return w.scaled(ctx.scale).coeffs

    w0 = direct(t)
    w1 = direct(t + math.pi)
    wc, _ = ctx.apply(_phase_vector(v, t, -1), policy)
    wc = _phase_vector(wc, t, 1).coeffs
    exact = ctx.scale * cmath.log(mu) * v.coeffs
    per = float(np.max(np.abs(w0 - w1)))
    con = float(np.max(np.abs(w0 - wc)))
    eig = float(np.max(np.abs(w0 - exact)))
    return {
        "period_deviation": per,
        "construction_deviation": con,
        "eigen_residual": eig,
        "dim": D,
        "prec": prec,
        "passed": max(per, con, eig) <= tol,
    }


@dataclass(frozen=True)
class WeakWeylReport:
    params: EvolutionParams
    diagonal_deviation: float
    weyl_gap: float
    return_deviation: float
    degenerate: bool

    def to_dict(self):
        return {
            "omega": [complex(self.params.omega).real, complex(self.params.omega).imag],
            "m": self.params.m,
            "t": self.params.t,
            "diagonal_deviation": self.diagonal_deviation,
            "weyl_gap": self.weyl_gap,
            "return_deviation": self.return_deviation,
            "degenerate": self.degenerate,
        }


def weak_weyl_failure_probe(params, D, *, symmetric=True):
    """Contrast the evolved diagonal with the weak Weyl requirement.

    A weak Weyl pair would shift every diagonal matrix element
    ``<xi_n, T(t) xi_n>`` by ``t``.  Conjugation by a diagonal unitary
    leaves the diagonal unchanged, so the gap is ``|t|``.
    ``return_deviation`` is ``max |T(t) - T|``, which vanishes when ``t``
    is a multiple of the period.
    """
    if abs(abs(complex(params.omega)) - 1.0) > 1e-12:
        raise DomainError("the probe uses the bounded boundary family (|omega| = 1)")
    ctx = EvolutionContext(params, D)
    Tt = ctx.conjugated_dense(symmetric)
    T0 = np.array((ctx.base.symmetric_operator() if symmetric else ctx.base.dense_operator()).to_dense())
    diag_dev = float(np.max(np.abs(np.diag(Tt) - np.diag(T0))))
    ret = float(np.max(np.abs(Tt - T0)))
    return WeakWeylReport(params, diag_dev, abs(float(params.t)), ret, float(params.t) == 0.0)


def write_period_sweep_csv(path, reports):
    """CSV with columns ``omega, m, t, deviation`` (shortest round-trip floats)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_re", "omega_im", "m", "t", "deviation"])
        for r in reports:
            om = complex(r.params.omega)
            w.writerow([repr(om.real), repr(om.imag), r.params.m, repr(float(r.params.t)), repr(r.deviation)])
