"""Functional calculus: power series for log, exp and arctan, the principal
Log for unit-modulus shifts, a contour-integral logarithm and divergence
probes.

The series act on a single running vector.  When the input vector carries
extended-precision coefficients the whole iteration runs in that
precision; this matters for eigenvectors of non-normal shift operators,
where rounding errors grow like ``||1 - A||**k``.
"""

import cmath
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import gmpy2
import numpy as np
import scipy.linalg

from . import _hp
from .errors import BranchError, ContourError, DimensionMismatchError, DomainError
from .fock import FockVector, TailBound
from .operators import BandedOperator, Identity, _rows, make, operator_norm_estimate

__all__ = [
    "SeriesKind",
    "SeriesStatus",
    "SeriesPolicy",
    "SeriesReport",
    "series_apply",
    "principal_log_apply",
    "dunford_log",
    "divergence_probe",
    "log_series_terms",
    "plan_log_series",
    "scalar_log_series",
]


class SeriesKind(enum.Enum):
    Log = "log"
    Exp = "exp"
    Arctan = "arctan"


class SeriesStatus(enum.Enum):
    Converged = "Converged"
    Diverged = "Diverged"
    Capped = "Capped"


@dataclass(frozen=True)
class SeriesPolicy:
    """Stopping rule for a power series.

    Parameters
    ----------
    tol : float
        Increment norm regarded as negligible.
    streak : int
        Number of consecutive negligible increments required.
    k_max : int
        Hard cap on the number of terms.
    divergence_factor : float
        Abort once the partial sum exceeds this multiple of the input norm.
    keep_trace : bool
        Record the partial-sum norm after every term.
    """

    tol: float = 1e-14
    streak: int = 3
    k_max: int = 100_000
    divergence_factor: float = 1e6
    keep_trace: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.streak < 1:
            raise ValueError("streak must be at least 1")
        if self.k_max < self.streak:
            raise ValueError("k_max must be at least streak")
        if not self.divergence_factor > 0:
            raise ValueError("divergence_factor must be positive")


@dataclass(frozen=True)
class SeriesReport:
    """Outcome of a series evaluation.

    ``truncation_budget`` bounds the effect of the discarded vector tail on
    the stored partial sum (``inf`` when no bound is available) and
    ``remainder_estimate`` extrapolates the unsummed terms from the last
    increment ratio.
    """

    terms_used: int
    last_increment: float
    status: SeriesStatus
    partial_norm_trace: Optional[np.ndarray] = None
    truncation_budget: float = math.inf
    remainder_estimate: float = math.inf
    certified: bool = False

    @property
    def converged(self):
        return self.status is SeriesStatus.Converged

    @property
    def budget(self):
        return self.truncation_budget + self.remainder_estimate

    def to_dict(self):
        trace = None if self.partial_norm_trace is None else [float(x) for x in self.partial_norm_trace]
        return {
            "terms_used": int(self.terms_used),
            "last_increment": float(self.last_increment),
            "status": self.status.value,
            "partial_norm_trace": trace,
            "truncation_budget": _jsonable(self.truncation_budget),
            "remainder_estimate": _jsonable(self.remainder_estimate),
            "certified": bool(self.certified),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        trace = d.get("partial_norm_trace")
        return cls(
            terms_used=int(d["terms_used"]),
            last_increment=float(d["last_increment"]),
            status=SeriesStatus(d["status"]),
            partial_norm_trace=None if trace is None else np.asarray(trace, dtype=float),
            truncation_budget=float(d.get("truncation_budget", math.inf)),
            remainder_estimate=float(d.get("remainder_estimate", math.inf)),
            certified=bool(d.get("certified", False)),
        )


def _jsonable(x):
    return float(x) if math.isfinite(x) else str(x)


# ---------------------------------------------------------------------------
# raw banded products used inside the iterations
# ---------------------------------------------------------------------------


class _Engine:
    """Array arithmetic in double or extended precision."""

    def __init__(self, A, v):
        self.A = A
        self.D = A.dim
        self.prec = v.prec if v.hp is not None else None
        self.x0 = v.hp if self.prec else v.coeffs

    def zeros(self):
        if self.prec:
            return _hp.zeros(self.D, self.prec)
        return np.zeros(self.D, dtype=complex)

    def matvec(self, x, A=None):
        A = self.A if A is None else A
        out = self.zeros()
        for d in A.bands:
            rows = _rows(self.D, d)
            if rows.size == 0:
                continue
            if self.prec:
                out[rows] = out[rows] + A.band_values_hp(d, self.prec) * x[rows + d]
            else:
                out[rows] += A.band_values(d) * x[rows + d]
        return out

    def norm(self, x):
        return _hp.norm(x) if self.prec else float(np.linalg.norm(x))

    def scalar(self, s):
        if self.prec:
            with _hp.working_precision(self.prec):
                return _hp.to_mpc(s)
        return complex(s)

    def vector(self, x, tail=None):
        if self.prec:
            return FockVector(None, tail, hp=x, prec=self.prec, check=False)
        return FockVector(x, tail, check=False)

    def context(self):
        if self.prec:
            return _hp.working_precision(self.prec)
        return _nullctx()


class _nullctx:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _coerce_kind(kind):
    if isinstance(kind, SeriesKind):
        return kind
    if isinstance(kind, str):
        for k in SeriesKind:
            if k.name.lower() == kind.lower() or k.value == kind.lower():
                return k
    raise ValueError(f"unknown series kind {kind!r}")


# ---------------------------------------------------------------------------
# truncation budgets
# ---------------------------------------------------------------------------


def _geom_sum(b, K):
    """``sum_{k=1}^{K} b**(k-1)`` without overflow (returns inf if huge)."""
    if K <= 0:
        return 0.0
    if abs(b - 1.0) < 1e-15:
        return float(K)
    logv = K * math.log(b) - math.log(abs(b - 1.0)) if b > 1 else -math.log1p(-b)
    if b > 1 and logv > 700:
        return math.inf
    return (b**K - 1.0) / (b - 1.0)


def _truncation_budget(kind, A, v, K, b=None):
    """Certified bound on the error caused by the discarded tail of ``v``."""
    t = v.tail
    if t is None:
        return math.inf, False
    D = v.dim
    tau = t.mass(D)
    if tau == 0.0:
        top = v.support_max()
        if A.is_lowering():
            return 0.0, True
        grow = top + K * A.raise_width * (2 if kind is SeriesKind.Arctan else 1)
        return (0.0, True) if grow < D else (math.inf, False)
    if not A.is_lowering() or not math.isfinite(tau):
        return math.inf, False
    a, cert_a = A.sup_band_sum()
    if kind is SeriesKind.Log:
        if b is None:
            b, cert_b = (make(Identity(), D) - A).sup_band_sum()
        else:
            cert_b = True
        total = a * tau * _geom_sum(max(b, 1e-300), K)
        return total, cert_a and cert_b
    if kind is SeriesKind.Exp:
        return tau * a * math.exp(a), cert_a
    # arctan and principal log: sum of a**k
    total = tau * a * _geom_sum(a, (2 * K + 1) if kind is SeriesKind.Arctan else K)
    return total, cert_a


def _remainder(increments, status):
    if status is not SeriesStatus.Converged:
        return math.inf
    if not increments or increments[-1] == 0.0:
        return 0.0
    if len(increments) < 2 or increments[-2] == 0.0:
        return increments[-1]
    rho = increments[-1] / increments[-2]
    if rho >= 1.0:
        return math.inf
    return increments[-1] * rho / (1.0 - rho)


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------


def series_apply(kind, A, v, policy=None):
    """Apply ``log A``, ``exp A`` or ``arctan A`` to ``v`` by its power series.

    Parameters
    ----------
    kind : SeriesKind or str
        ``Log``: ``-sum_{k>=1} (1/k) (1 - A)^k v``.
        ``Exp``: ``sum_{k>=0} A^k v / k!``.
        ``Arctan``: ``-sum_{k>=0} (-1)^k A^(2k+1) v / (2k+1)`` (note the
        overall sign, which follows the operator definition used for the
        angle operator).
    A : BandedOperator
    v : FockVector
        Runs in extended precision when ``v.hp`` is present.
    policy : SeriesPolicy, optional

    Returns
    -------
    (FockVector, SeriesReport)
        The partial sum at the stopping index.  Divergence is reported in
        the status, not raised.
    """
    kind = _coerce_kind(kind)
    policy = policy or SeriesPolicy()
    if A.dim != v.dim:
        raise DimensionMismatchError(f"operator dim {A.dim} vs vector dim {v.dim}")
    eng = _Engine(A, v)
    vnorm = v.norm()
    limit = policy.divergence_factor * max(vnorm, 1e-300)
    trace = [] if policy.keep_trace else None
    increments = []
    streak = 0
    status = SeriesStatus.Capped
    k = 0
    with eng.context():
        w = eng.x0.copy()
        if kind is SeriesKind.Log:
            s = eng.zeros()
            for k in range(1, policy.k_max + 1):
                w = w - eng.matvec(w)
                s = s - w / k
                inc = eng.norm(w) / k
                status, streak = _step(inc, increments, streak, policy, eng.norm(s), limit, trace)
                if status is not None:
                    break
        elif kind is SeriesKind.Exp:
            s = w.copy()
            for k in range(1, policy.k_max + 1):
                w = eng.matvec(w) / k
                s = s + w
                inc = eng.norm(w)
                status, streak = _step(inc, increments, streak, policy, eng.norm(s), limit, trace)
                if status is not None:
                    break
        else:
            w = eng.matvec(w)
            s = -w
            for k in range(1, policy.k_max + 1):
                w = eng.matvec(eng.matvec(w))
                term = w / (2 * k + 1)
                s = s + term if k % 2 else s - term
                inc = eng.norm(w) / (2 * k + 1)
                status, streak = _step(inc, increments, streak, policy, eng.norm(s), limit, trace)
                if status is not None:
                    break
        if status is None:
            status = SeriesStatus.Capped
    budget, cert = _truncation_budget(kind, A, v, k)
    report = SeriesReport(
        terms_used=k,
        last_increment=increments[-1] if increments else 0.0,
        status=status,
        partial_norm_trace=None if trace is None else np.asarray(trace),
        truncation_budget=budget,
        remainder_estimate=_remainder(increments, status),
        certified=cert,
    )
    return eng.vector(s), report


def _step(inc, increments, streak, policy, snorm, limit, trace):
    increments.append(inc)
    if trace is not None:
        trace.append(snorm)
    if inc == 0.0:
        return SeriesStatus.Converged, streak
    if not math.isfinite(snorm) or snorm > limit:
        return SeriesStatus.Diverged, streak
    streak = streak + 1 if inc <= policy.tol else 0
    if streak >= policy.streak:
        return SeriesStatus.Converged, streak
    if len(increments) >= policy.k_max:
        return SeriesStatus.Capped, streak
    return None, streak


def principal_log_apply(omega, A, v, policy=None):
    """Principal ``Log(omega - A) v = log(omega) v - sum (1/k) (A/omega)^k v``.

    Parameters
    ----------
    omega : complex
        Must have modulus one (to 1e-12); the scalar logarithm uses the
        principal branch ``arg in (-pi, pi]``.

    Raises
    ------
    DomainError
        If ``|omega| != 1``; use :func:`series_apply` or :func:`dunford_log`.
    """
    omega = complex(omega)
    if abs(abs(omega) - 1.0) > 1e-12:
        raise DomainError(f"principal Log needs |omega| = 1, got {abs(omega)}")
    policy = policy or SeriesPolicy()
    if A.dim != v.dim:
        raise DimensionMismatchError(f"operator dim {A.dim} vs vector dim {v.dim}")
    eng = _Engine(A, v)
    limit = policy.divergence_factor * max(v.norm(), 1e-300)
    trace = [] if policy.keep_trace else None
    increments = []
    streak = 0
    status = None
    k = 0
    with eng.context():
        inv = eng.scalar(1 / omega) if not eng.prec else 1 / eng.scalar(omega)
        logw = eng.scalar(_principal_log(omega)) if not eng.prec else _hp_log(omega)
        u = eng.x0.copy()
        s = u * logw
        for k in range(1, policy.k_max + 1):
            u = eng.matvec(u) * inv
            s = s - u / k
            inc = eng.norm(u) / k
            status, streak = _step(inc, increments, streak, policy, eng.norm(s), limit, trace)
            if status is not None:
                break
        if status is None:
            status = SeriesStatus.Capped
    budget, cert = _principal_budget(A, v, k)
    report = SeriesReport(
        terms_used=k,
        last_increment=increments[-1] if increments else 0.0,
        status=status,
        partial_norm_trace=None if trace is None else np.asarray(trace),
        truncation_budget=budget,
        remainder_estimate=_remainder(increments, status),
        certified=cert,
    )
    return eng.vector(s), report


def _principal_budget(A, v, K):
    t = v.tail
    if t is None:
        return math.inf, False
    tau = t.mass(v.dim)
    if tau == 0.0:
        if A.is_lowering() or v.support_max() + K * A.raise_width < v.dim:
            return 0.0, True
        return math.inf, False
    if not A.is_lowering() or not math.isfinite(tau):
        return math.inf, False
    a, cert = A.sup_band_sum()
    return tau * a * _geom_sum(a, K), cert


def _principal_log(z):
    z = complex(z)
    out = cmath.log(z)
    if out.imag <= -math.pi:  # keep arg in (-pi, pi]
        out += 2j * math.pi
    return out


def _hp_log(z):
    z = _hp.to_mpc(z)
    out = gmpy2.log(z)
    if out.imag <= -gmpy2.const_pi():
        out += gmpy2.mpc(0, 2 * gmpy2.const_pi())
    return out


# ---------------------------------------------------------------------------
# planning helpers
# ---------------------------------------------------------------------------


def log_series_terms(q, tol):
    """Terms needed so the remainder of ``sum q^k / k`` drops below ``tol``."""
    q = abs(q)
    if q == 0.0:
        return 1
    if not q < 1.0:
        raise DomainError("log series needs |1 - mu| < 1")
    K = 1
    while q ** (K + 1) / ((K + 1) * (1.0 - q)) > tol:
        K += 1
    return K


def plan_log_series(tail_for_dim, q, a, b, tol=1e-14, *, extra_terms=8, start=8, max_dim=1 << 14):
    """Choose a truncation and precision for a certified log series.

    Parameters
    ----------
    tail_for_dim : TailBound, callable or sequence of these
        Tail certificate of the input vector (or ``D -> TailBound``).  With a
        sequence the worst tail decides, which is how a commutator check
        plans for both ``phi`` and ``N phi``.
    q : float
        ``|1 - mu|`` for the eigenvalue ``mu`` that controls convergence.
    a, b : float
        Bounds on ``||A||`` and ``||1 - A||``.
    tol : float
        Target for both the series remainder and the truncation budget.

    Returns
    -------
    (int, int, int)
        ``(D, prec, K)``: dimension, bit precision and expected term count.
    """
    K = log_series_terms(q, tol) + extra_terms
    growth = _geom_sum(max(b, 1e-300), K)
    need = tol / max(a * growth, 1e-300)
    D = start
    while True:
        tails = tail_for_dim if isinstance(tail_for_dim, (list, tuple)) else [tail_for_dim]
        mass = max((t(D) if callable(t) else t).mass(D) for t in tails)
        if mass <= need:
            break
        D = int(D * 1.25) + 1
        if D > max_dim:
            raise DomainError(f"no truncation below {max_dim} meets the budget")
    amp = K * math.log2(max(b, 1.0))
    prec = _hp.required_precision(amp, tol)
    return D, prec, K


def scalar_log_series(mu, tol=1e-15, k_max=10_000_000):
    """``-sum (1/k) (1 - mu)^k`` summed in double precision (an oracle)."""
    z = 1.0 - complex(mu)
    if not abs(z) < 1.0:
        raise DomainError("scalar log series needs |1 - mu| < 1")
    s = 0j
    p = 1.0 + 0j
    for k in range(1, k_max):
        p *= z
        t = p / k
        s -= t
        if abs(t) < tol * (1 - abs(z)):
            break
    return s


# ---------------------------------------------------------------------------
# contour logarithm
# ---------------------------------------------------------------------------


def dunford_log(omega, m, A, r, Q=256, *, margin=1e-3):
    """Contour-integral logarithm ``log(omega - A^m)`` for ``|omega| > 1``.

    Evaluates ``(1/(2 pi i)) \\oint_{|z|=r} log(omega - z^m) (z - A)^{-1} dz``
    with the trapezoidal rule on ``Q`` equispaced nodes.  The branch of
    ``log(omega - z^m)`` is ``log(omega) + Log(1 - z^m / omega)``, which is
    continuous inside the disc of radius ``|omega|^(1/m)``.

    Parameters
    ----------
    omega : complex
        ``|omega| > 1``.
    m : int
        Power of the shift.
    A : BandedOperator
        Operator whose norm estimate must be below ``r``.
    r : float
        Contour radius in ``(||A||, |omega|^(1/m))``.
    Q : int
        Number of quadrature nodes.

    Returns
    -------
    BandedOperator
        Dense result wrapped as a banded operator.

    Raises
    ------
    ContourError
        No admissible radius, or ``r`` too close to the spectrum guard.
    BranchError
        ``omega - z^m`` vanishes on the contour or winds around zero.
    """
    omega = complex(omega)
    m = int(m)
    normA = operator_norm_estimate(A) if A.bands else 0.0
    rmax = abs(omega) ** (1.0 / m)
    if not rmax > normA + margin:
        raise ContourError(
            f"no admissible contour: |omega|^(1/m) = {rmax:g} does not exceed ||A|| = {normA:g}"
        )
    if not (normA + margin <= r < rmax):
        raise ContourError(f"radius {r} outside ({normA + margin:g}, {rmax:g})")
    theta = 2 * np.pi * np.arange(Q) / Q
    z = r * np.exp(1j * theta)
    fz = omega - z**m
    if np.min(np.abs(fz)) < 1e-12 * abs(omega):
        raise BranchError("omega - z^m vanishes on the contour")
    winding = np.sum(np.angle(np.roll(fz, -1) / fz)) / (2 * np.pi)
    if abs(winding) > 0.5:
        raise BranchError(f"omega - z^m winds {winding:.0f} times around zero")
    logf = cmath.log(omega) + np.log(1.0 - z**m / omega)
    D = A.dim
    M = A.to_dense()
    upper = A.is_lowering()
    I = np.eye(D, dtype=complex)
    acc = np.zeros((D, D), dtype=complex)
    for zj, lj in zip(z, logf):
        R = zj * I - M
        if upper:
            res = scipy.linalg.solve_triangular(R, I, lower=False)
        else:
            res = scipy.linalg.solve(R, I)
        acc += (zj * lj) * res
    acc /= Q
    return BandedOperator.from_dense(acc, name=f"dunford_log({omega:g}-z^{m})")


# ---------------------------------------------------------------------------
# divergence probe
# ---------------------------------------------------------------------------


def divergence_probe(A, v, probe_index, K):
    """Partial sums ``s_K = (xi_p, sum_{k<=K} (1/k) (1 - A)^k v)`` for ``K = 1..K``.

    For operators that only lower indices the iteration runs on ``v``;
    for operators that only raise indices it runs on ``xi_p`` with the
    adjoint, so the iterates never reach the truncation edge.  Mixed
    operators iterate on ``v`` within the compression.

    Returns
    -------
    ndarray of complex, shape (K,)
    """
    D = A.dim
    if A.dim != v.dim:
        raise DimensionMismatchError("operator and vector dims differ")
    if not 0 <= probe_index < D:
        raise IndexError("probe index outside truncation")
    out = np.empty(int(K), dtype=complex)
    eng = _Engine(A, v.without_hp())
    acc = 0j
    if A.is_raising() and not A.is_lowering():
        Ah = A.adjoint()
        u = np.zeros(D, dtype=complex)
        u[probe_index] = 1.0
        x = v.coeffs
        for k in range(1, int(K) + 1):
            u = u - eng.matvec(u, Ah)
            acc += np.vdot(u, x) / k
            out[k - 1] = acc
        return out
    w = v.coeffs.copy()
    for k in range(1, int(K) + 1):
        w = w - eng.matvec(w)
        acc += w[probe_index] / k
        out[k - 1] = acc
    return out
