"""Hermite-function coefficients of Gaussians.

The unitary ``U: L^2(R) -> l^2(N)`` sends the Hermite function
``v_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) e^{-x^2/2}`` to ``xi_n``.
Gaussians ``e^{-alpha x^2/2}`` and ``x e^{-alpha x^2/2}`` map to
super-coherent vectors with ``beta = (1 - alpha)/(1 + alpha)``.
``quadrature_overlap`` computes the same coefficients independently by
Gauss-Hermite quadrature.
"""

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyWarning, DomainError
from .fock import super_coherent_vector

__all__ = [
    "Parity",
    "GaussianProfile",
    "beta_of_alpha",
    "gaussian_to_fock",
    "gaussian_norm_squared",
    "hermite_functions",
    "quadrature_overlap",
    "BridgeReport",
    "bridge_check",
    "write_bridge_csv",
]

_PI_QUARTER = math.pi**0.25


class Parity(enum.Enum):
    Even = "Even"
    Odd = "Odd"


@dataclass(frozen=True)
class GaussianProfile:
    """``e^{-alpha x^2/2}`` (Even) or ``x e^{-alpha x^2/2}`` (Odd), ``0 < alpha < 1``."""

    alpha: float
    parity: Parity = Parity.Even

    def __post_init__(self):
        a = float(self.alpha)
        if not 0.0 < a < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "alpha", a)
        if not isinstance(self.parity, Parity):
            object.__setattr__(self, "parity", Parity(self.parity))

    @property
    def beta(self):
        return beta_of_alpha(self.alpha)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        g = np.exp(-0.5 * self.alpha * x * x)
        return x * g if self.parity is Parity.Odd else g


def beta_of_alpha(alpha):
    """``(1 - alpha)/(1 + alpha)``; the map is an involution of ``(0, 1)``."""
    return (1.0 - alpha) / (1.0 + alpha)


def gaussian_to_fock(profile, D):
    """Closed-form ``U f`` for a Gaussian profile.

    Even: ``pi^(1/4) sqrt(2/(1+alpha)) exp(beta a*^2/2) Omega``.
    Odd: the same constant times ``sqrt(2)/(1+alpha) a* exp(beta a*^2/2) Omega``.
    ``D`` may be an int or an adaptive truncation.
    """
    a = profile.alpha
    c = _PI_QUARTER * math.sqrt(2.0 / (1.0 + a))
    if profile.parity is Parity.Odd:
        v = super_coherent_vector(profile.beta, 1, D)
        c *= math.sqrt(2.0) / (1.0 + a)
    else:
        v = super_coherent_vector(profile.beta, 0, D)
    return v.scaled(c).with_label(f"U[{profile.parity.value}, alpha={a!r}]")


def gaussian_norm_squared(profile):
    """``||f||^2`` in ``L^2(R)``: ``sqrt(pi/alpha)`` or ``sqrt(pi)/(2 alpha^(3/2))``."""
    a = profile.alpha
    if profile.parity is Parity.Odd:
        return math.sqrt(math.pi) / (2.0 * a**1.5)
    return math.sqrt(math.pi / a)


def hermite_functions(n_max, x):
    """Normalized Hermite functions ``v_0..v_{n_max}`` at ``x``.

    Uses ``v_{n+1} = sqrt(2/(n+1)) x v_n - sqrt(n/(n+1)) v_{n-1}``.

    Returns
    -------
    ndarray, shape (n_max + 1, len(x))
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_max + 1, x.size))
    out[0] = np.exp(-0.5 * x * x) / _PI_QUARTER
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _nodes(profile, Q):
    # e^{-x^2/2} e^{-alpha x^2/2} = e^{-y^2} with x = y s
    s = math.sqrt(2.0 / (1.0 + profile.alpha))
    y, w = np.polynomial.hermite.hermgauss(Q)
    x = s * y
    # weight e^{-y^2} is divided back out; the integrand is v_n(x) f(x) s
    weights = s * w * np.exp(y * y)
    return x, weights


def _sum_overlaps(n_max, profile, Q):
    x, weights = _nodes(profile, Q)
    H = hermite_functions(n_max, x)
    fx = profile(x)
    return np.array([math.fsum(weights * row * fx) for row in H], dtype=complex)


def _warn_small_q(n_max, profile, Q, values):
    if Q >= n_max + 20:
        return
    ref = _sum_overlaps(n_max, profile, n_max + 40)
    est = float(np.max(np.abs(values - ref)))
    warnings.warn(
        f"quadrature size {Q} is below n + 20 = {n_max + 20}; estimated error {est:.3g}",
        AccuracyWarning,
        stacklevel=3,
    )


def quadrature_overlap(n, profile, Q=None):
    """``(v_n, f)`` by Gauss-Hermite quadrature after ``x = y sqrt(2/(1+alpha))``.

    Parameters
    ----------
    n : int
    profile : GaussianProfile
    Q : int, optional
        Number of nodes; defaults to ``n + 40``.

    Returns
    -------
    complex
        Real-valued for the real profiles used here.
    """
    n = int(n)
    if n < 0:
        raise DomainError("n must be nonnegative")
    Q = n + 40 if Q is None else int(Q)
    vals = _sum_overlaps(n, profile, Q)
    _warn_small_q(n, profile, Q, vals)
    return complex(vals[n])


def _overlaps(n_max, profile, Q):
    vals = _sum_overlaps(n_max, profile, Q)
    _warn_small_q(n_max, profile, Q, vals)
    return vals


@dataclass
class BridgeReport:
    alpha: float
    n_max: int
    tol: float
    max_deviation: float
    norm_deviation: float
    rows: list = field(default_factory=list, repr=False)

    @property
    def passed(self):
        return self.max_deviation <= self.tol

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "n_max": self.n_max,
            "tol": self.tol,
            "max_deviation": self.max_deviation,
            "norm_deviation": self.norm_deviation,
            "passed": self.passed,
        }


def bridge_check(alpha, n_max=40, tol=1e-8, Q=None):
    """Compare closed-form coefficients with quadrature for ``n <= n_max``, both parities.

    ``rows`` holds ``(parity, n, analytic, quadrature, deviation)``.
    ``norm_deviation`` is the relative gap between ``||U f||^2`` (adaptive
    truncation) and the closed-form ``L^2`` norm, worst over parities.
    """
    Q = int(n_max) + 40 if Q is None else int(Q)
    rows = []
    worst = 0.0
    norm_dev = 0.0
    for parity in Parity:
        prof = GaussianProfile(alpha, parity)
        v = gaussian_to_fock(prof, max(int(n_max) + 1, 16)).coeffs[: n_max + 1]
        q = _overlaps(int(n_max), prof, Q)
        dev = np.abs(v - q)
        worst = max(worst, float(dev.max()))
        for n in range(n_max + 1):
            rows.append((parity.value, n, complex(v[n]), complex(q[n]), float(dev[n])))
        full = gaussian_to_fock(prof, "auto(1e-18)")
        exact = gaussian_norm_squared(prof)
        norm_dev = max(norm_dev, abs(full.norm() ** 2 - exact) / exact)
    return BridgeReport(float(alpha), int(n_max), float(tol), worst, norm_dev, rows)


def write_bridge_csv(path, report):
    """CSV with columns ``parity, n, re, im, quadrature_re, deviation``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parity", "n", "re", "im", "quadrature_re", "deviation"])
        for parity, n, a, q, d in report.rows:
            w.writerow([parity, n, repr(a.real), repr(a.imag), repr(q.real), repr(d)])
