"""Truncated Fock-space vectors with certified geometric tail bounds.

A :class:`FockVector` stores the first ``D`` coefficients of a vector in
l^2(N) together with an optional certificate ``|c_n| <= C r**n`` for all
``n >= n0`` of the *untruncated* vector.  The certificate bounds what the
truncation throws away, and downstream reports use it to attribute errors.

The inner product is conjugate-linear in the first argument.
"""

import json
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import gmpy2
import numpy as np
from scipy.special import gammaln

from . import _hp
from .errors import (
    DimensionMismatchError,
    DivergentFamilyError,
    DomainError,
    IndexOutOfTruncationError,
    UnsatisfiableConstraintError,
)

__all__ = [
    "TailBound",
    "Auto",
    "resolve_dim",
    "FockVector",
    "basis_vector",
    "coherent_vector",
    "super_coherent_vector",
    "generalized_eigen_vector",
    "geometric_vector",
    "SumZero",
    "WeightedSumZero",
    "ResidueClassZero",
    "GeometricEigen",
    "SupportBound",
    "AllOf",
    "ccr_domain_sample",
    "make_rng",
]

MAX_AUTO_DIM = 1 << 20


# ---------------------------------------------------------------------------
# tail certificates and adaptive dimensions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailBound:
    """Certificate ``|c_n| <= C * r**n`` for every ``n >= n0``.

    Parameters
    ----------
    n0 : int
        First index covered by the bound.
    C : float
        Nonnegative prefactor.
    r : float
        Decay rate in ``[0, 1)``.
    """

    n0: int
    C: float
    r: float

    def __post_init__(self):
        if self.n0 < 0:
            raise ValueError("n0 must be nonnegative")
        if not (self.C >= 0.0) or math.isnan(self.C):
            raise ValueError("C must be a nonnegative real")
        if not (0.0 <= self.r < 1.0):
            raise ValueError("r must lie in [0, 1)")

    def bound(self, n):
        """Value of ``C r**n`` (``inf`` for ``n < n0``)."""
        n = np.asarray(n)
        with np.errstate(divide="ignore", under="ignore", over="ignore"):
            if self.C == 0.0:
                val = np.zeros(n.shape)
            elif self.r == 0.0:
                val = np.where(n == 0, self.C, 0.0)
            else:
                val = np.exp(math.log(self.C) + n * math.log(self.r))
        val = np.where(n >= self.n0, val, np.inf)
        return val if val.ndim else float(val)

    def mass(self, D):
        """Bound on the l^1 mass ``sum_{n >= D} |c_n|`` of the discarded tail.

        The l^1 mass also bounds the l^2 norm of the tail.
        """
        if D < self.n0:
            return math.inf
        if self.C == 0.0:
            return 0.0
        if self.r == 0.0:
            return self.C if D == 0 else 0.0
        logm = math.log(self.C) + D * math.log(self.r) - math.log1p(-self.r)
        return math.exp(logm) if logm < 700 else math.inf

    def scaled(self, s):
        """Certificate for ``s * c``."""
        return TailBound(self.n0, self.C * abs(s), self.r)

    def combine(self, other):
        """Certificate for the sum of two certified vectors."""
        return TailBound(max(self.n0, other.n0), self.C + other.C, max(self.r, other.r))

    def shifted(self, d):
        """Certificate after moving every index up by ``d >= 0``."""
        if self.r == 0.0:
            return TailBound(self.n0 + d, self.C, 0.0)
        return TailBound(self.n0 + d, self.C * self.r ** (-d), self.r)

    def absorb_polynomial(self, p, theta=0.2):
        """Certificate after multiplying by a factor bounded by ``(n+1)**p``.

        The polynomial is absorbed into a slower rate ``r**(1 - theta)``
        using ``max_x x**p exp(-a x) = (p / (e a))**p``.
        """
        if p <= 0 or self.C == 0.0:
            return self
        if self.r == 0.0:
            return TailBound(self.n0, self.C * (self.n0 + 1) ** p, 0.0)
        lam = -math.log(self.r)
        # (n+1)^p r^(theta n) <= r^(-theta) (p / (e theta lam))^p
        logM = theta * lam + p * math.log(p / (math.e * theta * lam))
        logC = math.log(self.C) + logM
        return TailBound(self.n0, math.exp(min(logC, 700.0)), self.r ** (1.0 - theta))

    def to_dict(self):
        return {"n0": int(self.n0), "C": float(self.C), "r": float(self.r)}


@dataclass(frozen=True)
class Auto:
    """Adaptive truncation: the smallest ``D`` with certified tail mass below ``eps``."""

    eps: float = 1e-14
    min_dim: int = 1

    def resolve(self, tail):
        if tail is None:
            raise DomainError("adaptive truncation needs a tail certificate")
        lo = max(self.min_dim, tail.n0, 1)
        if tail.mass(lo) < self.eps:
            return lo
        if tail.r == 0.0:
            return max(lo, tail.n0 + 1)
        need = (math.log(self.eps) + math.log1p(-tail.r) - math.log(max(tail.C, 1e-300))) / math.log(tail.r)
        D = max(lo, int(math.ceil(need)))
        while tail.mass(D) >= self.eps:
            D += 1
        if D > MAX_AUTO_DIM:
            raise DomainError(f"adaptive truncation needs D={D} > {MAX_AUTO_DIM}")
        return D


_AUTO_RE = re.compile(r"^\s*auto\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*$")


def _as_auto(D):
    if isinstance(D, Auto):
        return D
    if isinstance(D, str):
        m = _AUTO_RE.match(D)
        if not m:
            raise ValueError(f"cannot parse dimension {D!r}")
        return Auto(float(m.group(1))) if m.group(1) else Auto()
    return None


def resolve_dim(D, tail=None):
    """Turn ``D`` (an int, ``Auto`` or ``"auto(eps)"``) into an integer."""
    auto = _as_auto(D)
    if auto is not None:
        return auto.resolve(tail)
    D = int(D)
    if D < 1:
        raise ValueError("dimension must be positive")
    return D


# ---------------------------------------------------------------------------
# FockVector
# ---------------------------------------------------------------------------


class FockVector:
    """Immutable truncated vector in l^2(N).

    Parameters
    ----------
    coeffs : array_like of complex
        Coefficients on ``xi_0 .. xi_{D-1}``.
    tail : TailBound, optional
        Certificate for the untruncated vector.
    hp : ndarray of gmpy2.mpc, optional
        Extended-precision copy of the coefficients.
    prec : int, optional
        Bit precision of ``hp``.
    label : str, optional
        Free-form identifier used in reports.
    """

    __slots__ = ("_coeffs", "_tail", "_hp", "_prec", "label")

    def __init__(self, coeffs=None, tail=None, *, hp=None, prec=None, label=None, check=True):
        if hp is not None:
            if prec is None:
                raise ValueError("prec is required with hp coefficients")
            hp = np.array(hp, dtype=object)
            if coeffs is None:
                coeffs = _hp.to_complex(hp)
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a nonempty 1-d array")
        if hp is not None and hp.shape != c.shape:
            raise DimensionMismatchError("hp and coeffs differ in length")
        c.setflags(write=False)
        if hp is not None:
            hp.setflags(write=False)
        if tail is not None and not isinstance(tail, TailBound):
            tail = TailBound(*tail)
        self._coeffs = c
        self._tail = tail
        self._hp = hp
        self._prec = int(prec) if hp is not None else None
        self.label = label
        if check and tail is not None:
            self._check_tail()

    def _check_tail(self):
        t = self._tail
        if t.n0 >= self.dim:
            return
        idx = np.arange(t.n0, self.dim)
        excess = np.abs(self._coeffs[t.n0:]) - t.bound(idx)
        if np.any(excess > 1e-14 * max(1.0, t.C)):
            n = int(idx[np.argmax(excess)])
            raise ValueError(f"tail certificate violated at n={n}")

    # basic properties -----------------------------------------------------
    @property
    def dim(self):
        return self._coeffs.shape[0]

    @property
    def coeffs(self):
        return self._coeffs

    @property
    def tail(self):
        return self._tail

    @property
    def hp(self):
        return self._hp

    @property
    def prec(self):
        return self._prec

    def __len__(self):
        return self.dim

    def __repr__(self):
        lab = f" {self.label!r}" if self.label else ""
        hp = f", prec={self._prec}" if self._hp is not None else ""
        return f"<FockVector{lab} dim={self.dim}{hp} norm={self.norm():.6g}>"

    def norm(self):
        """Euclidean norm of the stored coefficients."""
        if self._hp is not None:
            return _hp.norm(self._hp)
        return float(np.linalg.norm(self._coeffs))

    def squared_norm(self):
        return self.norm() ** 2

    def tail_mass(self):
        """Certified bound on the norm of the discarded coefficients."""
        return math.inf if self._tail is None else self._tail.mass(self.dim)

    def inner(self, other):
        """``(self, other)``, conjugate-linear in ``self``."""
        _check_dims(self, other)
        return complex(np.vdot(self._coeffs, other._coeffs))

    def support_max(self):
        """Largest index with a nonzero coefficient (-1 for the zero vector)."""
        nz = np.flatnonzero(self._coeffs)
        if self._hp is not None:
            nz = np.flatnonzero([z != 0 for z in self._hp])
        return int(nz[-1]) if nz.size else -1

    def finite_support(self):
        """True when the tail certificate says the vector vanishes from ``dim`` on."""
        t = self._tail
        return t is not None and t.mass(self.dim) == 0.0

    def without_hp(self):
        return FockVector(self._coeffs, self._tail, label=self.label, check=False)

    def with_label(self, label):
        return FockVector(self._coeffs, self._tail, hp=self._hp, prec=self._prec, label=label, check=False)

    def with_tail(self, tail):
        return FockVector(self._coeffs, tail, hp=self._hp, prec=self._prec, label=self.label)

    def with_hp(self, prec):
        """Copy carrying an extended-precision array built from the doubles."""
        if self._hp is not None and self._prec >= prec:
            return self
        hp = _hp.asarray(self._coeffs if self._hp is None else self._hp, prec)
        return FockVector(self._coeffs, self._tail, hp=hp, prec=prec, label=self.label, check=False)

    def project(self, mask):
        """Zero every coefficient where ``mask`` is false."""
        mask = np.asarray(mask, dtype=bool)
        c = np.where(mask, self._coeffs, 0)
        hp = None
        if self._hp is not None:
            hp = self._hp.copy()
            zero = _hp.zeros(1, self._prec)[0]
            hp[~mask] = zero
        return FockVector(c, self._tail, hp=hp, prec=self._prec, label=self.label, check=False)

    def even_part(self):
        return self.project(np.arange(self.dim) % 2 == 0)

    def odd_part(self):
        return self.project(np.arange(self.dim) % 2 == 1)

    # arithmetic -----------------------------------------------------------
    def _binary(self, other, sign):
        _check_dims(self, other)
        c = self._coeffs + sign * other._coeffs
        tail = None
        if self._tail is not None and other._tail is not None:
            tail = self._tail.combine(other._tail)
        hp = prec = None
        if self._hp is not None and other._hp is not None:
            prec = max(self._prec, other._prec)
            with _hp.working_precision(prec):
                hp = self._hp + other._hp if sign > 0 else self._hp - other._hp
            c = None
        return FockVector(c, tail, hp=hp, prec=prec, check=False)

    def __add__(self, other):
        if not isinstance(other, FockVector):
            return NotImplemented
        return self._binary(other, 1)

    def __sub__(self, other):
        if not isinstance(other, FockVector):
            return NotImplemented
        return self._binary(other, -1)

    def scaled(self, s):
        """Multiply by a scalar (``s`` may be an extended-precision number)."""
        tail = None if self._tail is None else self._tail.scaled(complex(s))
        if self._hp is not None:
            with _hp.working_precision(self._prec):
                hp = self._hp * _hp.to_mpc(s)
            return FockVector(None, tail, hp=hp, prec=self._prec, check=False)
        return FockVector(self._coeffs * complex(s), tail, check=False)

    def __mul__(self, s):
        return self.scaled(s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        if self._hp is not None:
            with _hp.working_precision(self._prec):
                inv = 1 / _hp.to_mpc(s)
            return self.scaled(inv)
        return self.scaled(1.0 / complex(s))

    def __neg__(self):
        return self.scaled(-1)

    def normalized(self):
        n = self.norm()
        if n == 0.0:
            raise DomainError("cannot normalize the zero vector")
        return self / n

    # serialization --------------------------------------------------------
    def to_dict(self):
        """JSON-ready dictionary ``{dim, re, im, tail}``."""
        return {
            "dim": self.dim,
            "re": [float(x) for x in self._coeffs.real],
            "im": [float(x) for x in self._coeffs.imag],
            "tail": None if self._tail is None else self._tail.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        c = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        if len(c) != int(d["dim"]):
            raise ValueError("dim does not match coefficient count")
        tail = d.get("tail")
        tail = None if tail is None else TailBound(int(tail["n0"]), float(tail["C"]), float(tail["r"]))
        return cls(c, tail)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _check_dims(u, v):
    if u.dim != v.dim:
        raise DimensionMismatchError(f"dimensions differ: {u.dim} vs {v.dim}")


# ---------------------------------------------------------------------------
# vector families
# ---------------------------------------------------------------------------


def basis_vector(n, D, *, prec=None):
    """The basis vector ``xi_n`` (``xi_0`` is the vacuum).

    Raises
    ------
    IndexOutOfTruncationError
        If ``n >= D``.
    """
    tail = TailBound(n + 1, 0.0, 0.0)
    D = resolve_dim(D, tail)
    if not 0 <= n < D:
        raise IndexOutOfTruncationError(f"index {n} outside truncation of size {D}")
    c = np.zeros(D, dtype=complex)
    c[n] = 1.0
    hp = None
    if prec is not None:
        hp = _hp.zeros(D, prec)
        with _hp.working_precision(prec):
            hp[n] = _hp.to_mpc(1)
    return FockVector(c, tail, hp=hp, prec=prec, label=f"xi_{n}")


def _phase_power(beta, k):
    """``exp(i k arg beta)`` for an integer array ``k``."""
    return np.exp(1j * np.angle(beta) * k)


def coherent_vector(beta, D, *, prec=None):
    """Normalized coherent vector ``exp(-|b|^2/2) sum b^n / sqrt(n!) xi_n``.

    The tail certificate starts at ``n0 = max(1, ceil(4|b|^2))`` with rate
    ``|b| / sqrt(n0)``, which bounds every later coefficient ratio.
    """
    beta = complex(beta)
    if beta == 0:
        return basis_vector(0, D, prec=prec).with_label("coherent(0)")
    b = abs(beta)
    n0 = max(1, math.ceil(4 * b * b))
    r = b / math.sqrt(n0)
    logc_n0 = -0.5 * b * b + n0 * math.log(b) - 0.5 * float(gammaln(n0 + 1))
    logC = logc_n0 - n0 * math.log(r)
    tail = TailBound(n0, math.exp(min(logC, 700.0)), r)
    D = resolve_dim(D, tail)
    n = np.arange(D)
    mag = np.exp(-0.5 * b * b + n * math.log(b) - 0.5 * gammaln(n + 1))
    c = mag * _phase_power(beta, n)
    hp = None
    if prec is not None:
        hp = _hp.zeros(D, prec)
        with _hp.working_precision(prec):
            bb = _hp.to_mpc(beta)
            hp[0] = gmpy2.mpc(gmpy2.exp(-gmpy2.norm(bb) / 2))
            for k in range(1, D):
                hp[k] = hp[k - 1] * bb / gmpy2.sqrt(k)
        c = None
    return FockVector(c, tail, hp=hp, prec=prec, label=f"coherent({beta:g})")


def super_coherent_vector(beta, j, D, *, prec=None):
    """Unnormalized ``a*^j exp(beta a*^2 / 2) Omega``.

    For ``j = 0`` the coefficients are ``c_{2k} = (beta/2)^k sqrt((2k)!) / k!``
    and the squared norm is ``(1 - |beta|^2)^(-1/2)``.

    Raises
    ------
    DomainError
        If ``|beta| >= 1``; the vacuum is then outside the domain of the
        exponential.
    """
    beta = complex(beta)
    j = int(j)
    if j < 0:
        raise DomainError("j must be nonnegative")
    if not abs(beta) < 1.0:
        raise DomainError(f"super coherent vector needs |beta| < 1, got {abs(beta)}")
    b = abs(beta)
    if b == 0.0:
        tail = TailBound(j + 1, 0.0, 0.0)
        D = resolve_dim(D, tail)
        if j >= D:
            raise IndexOutOfTruncationError(f"a*^{j} Omega needs D > {j}")
        v = basis_vector(j, D, prec=prec).scaled(math.sqrt(math.factorial(j)))
        return v.with_label(f"super_coherent(0,{j})")
    r = math.sqrt(b)
    tail = TailBound(0, 1.0, r)
    if j:
        tail = TailBound(0, r ** (-j), r).absorb_polynomial(j / 2.0)
    D = resolve_dim(D, tail)
    n = np.arange(D)
    m = n - j
    valid = (m >= 0) & (m % 2 == 0)
    k = np.where(valid, m // 2, 0)
    with np.errstate(divide="ignore"):
        logmag = k * math.log(b / 2) + 0.5 * gammaln(2 * k + 1) - gammaln(k + 1)
        logmag += 0.5 * (gammaln(n + 1) - gammaln(np.maximum(m, 0) + 1))
    c = np.where(valid, np.exp(logmag) * _phase_power(beta, k), 0.0)
    hp = None
    if prec is not None:
        hp = _hp.zeros(D, prec)
        with _hp.working_precision(prec):
            bb = _hp.to_mpc(beta)
            base = _hp.zeros(D, prec)
            base[0] = gmpy2.mpc(1)
            for kk in range(0, (D - 1) // 2):
                base[2 * kk + 2] = base[2 * kk] * bb * gmpy2.sqrt(
                    gmpy2.mpfr(2 * kk + 1) / (2 * kk + 2)
                )
            for _ in range(j):
                nxt = _hp.zeros(D, prec)
                for i in range(1, D):
                    nxt[i] = base[i - 1] * gmpy2.sqrt(i)
                base = nxt
            hp = base
        c = None
    return FockVector(c, tail, hp=hp, prec=prec, label=f"super_coherent({beta:g},{j})")


def geometric_vector(alpha, D, *, prec=None):
    """Geometric vector ``(1, alpha, alpha^2, ...)``, an eigenvector of ``L``.

    Raises
    ------
    DivergentFamilyError
        If ``|alpha| >= 1`` (the sequence is not square summable).
    """
    alpha = complex(alpha)
    a = abs(alpha)
    if not a < 1.0:
        raise DivergentFamilyError(f"geometric vector needs |alpha| < 1, got {a}")
    if a == 0.0:
        return basis_vector(0, D, prec=prec).with_label("geometric(0)")
    tail = TailBound(0, 1.0, a)
    D = resolve_dim(D, tail)
    n = np.arange(D)
    with np.errstate(under="ignore"):
        c = np.exp(n * math.log(a)) * _phase_power(alpha, n)
    hp = None
    if prec is not None:
        hp = _hp.zeros(D, prec)
        with _hp.working_precision(prec):
            aa = _hp.to_mpc(alpha)
            hp[0] = gmpy2.mpc(1)
            for i in range(1, D):
                hp[i] = hp[i - 1] * aa
        c = None
    return FockVector(c, tail, hp=hp, prec=prec, label=f"geometric({alpha:g})")


def _ratio_certificate(ratios, mags, k):
    """Geometric certificate from coefficient ratios over the second half."""
    J = len(ratios)
    j0 = max(1, J // 2)
    window = ratios[j0 - 1:]
    rho = float(np.max(window))
    if J >= 4:
        lim = 2.0 * ratios[-1] - ratios[j0 - 1]
        if ratios[-1] > ratios[j0 - 1]:
            rho = max(rho, lim)
    return j0, rho


def generalized_eigen_vector(f, k, alpha, D, *, prec=None):
    """The vector ``exp(alpha f_N L*^k) Omega``.

    Coefficients are ``c[j k] = prod_{i=1}^{j} f(i k) alpha^j / j!`` and zero
    off the multiples of ``k``.  With ``f(n) = n`` this is an eigenvector of
    ``L^k`` with eigenvalue ``k alpha``.

    Parameters
    ----------
    f : callable
        Weight ``f(n)`` evaluated at Python ints.  For extended precision
        write it with ``mpmath`` or ``gmpy2`` functions.
    k : int
        Step of the creation power.
    alpha : complex
        Family parameter.
    D : int, Auto or str
        Truncation.
    prec : int, optional
        Also build an extended-precision copy.

    Raises
    ------
    DivergentFamilyError
        If the coefficient ratios ``|f(j k) alpha / j|`` do not stay below
        one over the second half of the stored range.

    Notes
    -----
    The tail certificate assumes the ratio sequence has settled by the end
    of the stored range: it uses the larger of the window maximum and a
    linear extrapolation of the trend.
    """
    k = int(k)
    if k < 1:
        raise DomainError("k must be positive")
    alpha = complex(alpha)
    if alpha == 0:
        return basis_vector(0, D, prec=prec).with_label("xi(0)")

    def ratios_upto(J):
        return np.array([abs(complex(f(i * k)) * alpha / i) for i in range(1, J + 1)])

    auto = _as_auto(D)
    if auto is None:
        D = resolve_dim(D)
        J = (D - 1) // k
        tail = None
        ratios = ratios_upto(max(J, 1))
    else:
        J = 32
        while True:
            ratios = ratios_upto(J)
            tail = _certify(ratios, k, alpha)
            if tail is not None and tail.mass(J * k + 1) < auto.eps:
                break
            if J * k > MAX_AUTO_DIM:
                raise DivergentFamilyError("no adaptive truncation found")
            J *= 2
        D = auto.resolve(tail)
        J = (D - 1) // k
        ratios = ratios[:J] if J <= len(ratios) else ratios_upto(J)
    if J >= 1:
        tail = _certify(ratios, k, alpha)
        if tail is None:
            raise DivergentFamilyError(
                f"coefficient ratios |f(jk) alpha / j| reach {ratios.max():.3g} >= 1 "
                "within the truncation"
            )
    else:
        tail = None
    # magnitudes in log space, phases from alpha and f
    c = np.zeros(D, dtype=complex)
    c[0] = 1.0
    logmag = 0.0
    phase = 1.0 + 0j
    for i in range(1, J + 1):
        fi = complex(f(i * k))
        if fi == 0:
            break
        logmag += math.log(abs(fi)) + math.log(abs(alpha)) - math.log(i)
        phase *= (fi / abs(fi)) * (alpha / abs(alpha))
        c[i * k] = math.exp(logmag) * phase if logmag > -745 else 0.0
    hp = None
    if prec is not None:
        hp = _hp.zeros(D, prec)
        with _hp.working_precision(prec):
            aa = _hp.to_mpc(alpha)
            hp[0] = gmpy2.mpc(1)
            for i in range(1, J + 1):
                hp[i * k] = hp[(i - 1) * k] * _hp.evaluate(f, i * k, prec) * aa / i
        c = None
    if tail is not None:
        tail = _fit_tail(tail, c if hp is None else _hp.to_complex(hp))
    return FockVector(c, tail, hp=hp, prec=prec, label=f"xi(alpha={alpha:g},k={k})")


def _certify(ratios, k, alpha):
    if len(ratios) == 0:
        return None
    j0, rho = _ratio_certificate(ratios, None, k)
    if not rho < 1.0:
        return None
    # |c_{j0 k}| from the log-sum of ratios
    logc = float(np.sum(np.log(np.maximum(ratios[:j0], 1e-300))))
    if rho == 0.0:
        return TailBound(j0 * k + 1, 0.0, 0.0)
    r = rho ** (1.0 / k)
    logC = logc - j0 * k * math.log(r)
    return TailBound(j0 * k, math.exp(min(logC, 700.0)), r)


def _fit_tail(tail, c):
    """Enlarge ``C`` slightly if rounding pushes a stored entry over the bound."""
    if tail.n0 >= len(c) or tail.C == 0.0:
        return tail
    idx = np.arange(tail.n0, len(c))
    b = tail.bound(idx)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(b > 0, np.abs(c[tail.n0:]) / b, 0.0)
    worst = float(np.max(q)) if q.size else 0.0
    if worst > 1.0:
        return TailBound(tail.n0, tail.C * worst * (1 + 1e-12), tail.r)
    return tail


# ---------------------------------------------------------------------------
# domain constraints and sampling
# ---------------------------------------------------------------------------


def make_rng(seed):
    """Counter-based generator used for every random draw in the package."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class SumZero:
    """Vectors with ``sum_n c_n = 0``."""

    def rows(self, D):
        return np.ones((1, D), dtype=complex)

    def __str__(self):
        return "SumZero"


@dataclass(frozen=True)
class WeightedSumZero:
    """Vectors with ``sum_n G(n) c_n = 0`` where ``G(n) = prod_{k<n} g(k)``.

    This is the functional annihilated by the CCR of the weighted Galapon
    operator; ``G`` also defines the diagonal gauge that maps the weighted
    operator to the unweighted one.
    """

    g: object

    def rows(self, D):
        return cumulative_weights(self.g, D)[None, :]

    def __str__(self):
        return f"WeightedSumZero({getattr(self.g, '__name__', 'g')})"


def cumulative_weights(g, D):
    """``G(n) = prod_{k<n} g(k)`` for ``n < D`` (``G(0) = 1``)."""
    vals = np.array([complex(g(k)) for k in range(max(D - 1, 0))], dtype=complex)
    if np.any(vals == 0):
        raise DomainError("weight sequence has a zero")
    out = np.ones(D, dtype=complex)
    if D > 1:
        out[1:] = np.cumprod(vals)
    return out


@dataclass(frozen=True)
class ResidueClassZero:
    """Vectors with ``sum_j conj(omega)^j c_{l + m j} = 0`` for each ``l < m``."""

    omega: complex
    m: int

    def __post_init__(self):
        if abs(abs(complex(self.omega)) - 1.0) > 1e-12:
            raise DomainError("ResidueClassZero needs |omega| = 1")
        if int(self.m) < 1:
            raise DomainError("m must be positive")

    def rows(self, D):
        m = int(self.m)
        w = np.conj(complex(self.omega))
        out = np.zeros((m, D), dtype=complex)
        for l in range(m):
            idx = np.arange(l, D, m)
            out[l, idx] = w ** np.arange(idx.size)
        return out

    def __str__(self):
        return f"ResidueClassZero({complex(self.omega):g},{self.m})"


@dataclass(frozen=True)
class GeometricEigen:
    """Multiples of the geometric vector ``(1, alpha, alpha^2, ...)``."""

    alpha: complex

    def __str__(self):
        return f"GeometricEigen({complex(self.alpha):g})"


@dataclass(frozen=True)
class SupportBound:
    """Vectors supported in ``0 .. n_max``."""

    n_max: int

    def __str__(self):
        return f"SupportBound({self.n_max})"


@dataclass(frozen=True)
class AllOf:
    """Conjunction of constraints."""

    parts: Tuple = field(default_factory=tuple)

    def __init__(self, *parts):
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, AllOf) else [p])
        object.__setattr__(self, "parts", tuple(flat))

    def __str__(self):
        return "&".join(str(p) for p in self.parts)


def _flatten(constraint):
    return list(constraint.parts) if isinstance(constraint, AllOf) else [constraint]


def ccr_domain_sample(constraint, seed, D, *, support=None):
    """Deterministic unit vector satisfying a domain constraint.

    A complex Gaussian vector drawn from ``Philox(seed)`` on the first
    ``support`` coordinates (default ``D // 2``) is projected onto the
    null space of the constraint rows.  For ``GeometricEigen`` the result
    is a random unit multiple of the geometric vector.

    Raises
    ------
    UnsatisfiableConstraintError
        If only the zero vector satisfies the constraint.
    """
    parts = _flatten(constraint)
    rng = make_rng(seed)
    geo = [p for p in parts if isinstance(p, GeometricEigen)]
    linear = [p for p in parts if hasattr(p, "rows")]
    bounds = [p for p in parts if isinstance(p, SupportBound)]
    label = f"{constraint}#seed{seed}"
    if geo:
        alphas = {complex(p.alpha) for p in geo}
        if len(alphas) > 1:
            raise UnsatisfiableConstraintError("two different geometric eigenvalues")
        alpha = alphas.pop()
        base = geometric_vector(alpha, D)
        s = complex(rng.standard_normal(), rng.standard_normal())
        v = base.scaled(s).normalized()
        if bounds and alpha != 0 and min(b.n_max for b in bounds) < D - 1:
            raise UnsatisfiableConstraintError("geometric vectors have infinite support")
        for p in linear:
            resid = np.abs(p.rows(D) @ v.coeffs)
            # the functionals are infinite sums; the truncated sum must vanish
            if np.any(resid > 1e-12):
                raise UnsatisfiableConstraintError(f"{p} excludes {geo[0]}")
        return v.with_label(label)
    s = D // 2 if support is None else int(support)
    for b in bounds:
        s = min(s, int(b.n_max) + 1)
    s = min(s, D)
    if s < 1:
        raise UnsatisfiableConstraintError("empty support")
    z = rng.standard_normal(s) + 1j * rng.standard_normal(s)
    if linear:
        U = np.vstack([p.rows(D)[:, :s] for p in linear])
        rank = np.linalg.matrix_rank(U)
        if rank >= s:
            raise UnsatisfiableConstraintError(
                f"{constraint} leaves no freedom on {s} coordinates"
            )
        pinv = np.linalg.pinv(U)
        for _ in range(2):
            z = z - pinv @ (U @ z)
    nrm = np.linalg.norm(z)
    if nrm == 0.0:
        raise UnsatisfiableConstraintError("projection produced the zero vector")
    c = np.zeros(D, dtype=complex)
    c[:s] = z / nrm
    return FockVector(c, TailBound(s, 0.0, 0.0), label=label)
