"""Banded operators on the truncated Fock space.

A :class:`BandedOperator` stores diagonals ``d = column - row`` as entry
generators ``n -> A[n, n + d]``.  Generators are defined for every row of
the infinite matrix, so the truncation size can change and products are
compressions of the infinite products: ``L L* = 1`` exactly and
``L* L = 1 - P_Omega``.
"""

import csv
import math
import numbers
from dataclasses import dataclass
from typing import Callable, Optional

import gmpy2
import numpy as np

from . import _hp
from .errors import ConvergenceError, DimensionMismatchError, SupportOverflowError
from .fock import FockVector, TailBound, make_rng

__all__ = [
    "Band",
    "BandedOperator",
    "LeftShift",
    "RightShift",
    "Number",
    "Annihilate",
    "Create",
    "Identity",
    "ProjOmega",
    "ProjGeq2",
    "ProjEven",
    "Diagonal",
    "FactorialWeight",
    "make",
    "apply",
    "compose",
    "commutator_apply",
    "hermitian_norm",
    "operator_norm_estimate",
    "power",
]


# ---------------------------------------------------------------------------
# bands
# ---------------------------------------------------------------------------


class Band:
    """Entry generator of one diagonal.

    Parameters
    ----------
    const : number, optional
        Constant value on every row.
    scalar : callable, optional
        ``scalar(n)`` for a Python int ``n``.  Used for extended precision,
        so it should be written with ``gmpy2`` or ``mpmath`` functions when
        the values are irrational.
    vector : callable, optional
        Fast ``vector(rows) -> complex array`` used in double precision.
    growth : (float, float), optional
        ``(G, p)`` with ``|entry(n)| <= G (n+1)**p`` for all rows; needed to
        propagate tail certificates.
    """

    __slots__ = ("const", "scalar", "vector", "growth")

    def __init__(self, const=None, *, scalar=None, vector=None, growth=None):
        if const is None and scalar is None:
            raise ValueError("a band needs a constant or a scalar generator")
        self.const = const
        self.scalar = scalar
        self.vector = vector
        if growth is None and const is not None:
            growth = (abs(complex(const)), 0.0)
        self.growth = growth

    @classmethod
    def coerce(cls, value):
        if isinstance(value, Band):
            return value
        if callable(value):
            return cls(scalar=value)
        return cls(const=value)

    def is_zero(self):
        return self.const is not None and complex(self.const) == 0

    def at(self, n):
        """Double-precision value at row ``n``."""
        if self.const is not None:
            return complex(self.const)
        return complex(self.scalar(int(n)))

    def at_hp(self, n, prec):
        if self.const is not None:
            return _hp.evaluate(self.const, n, prec)
        return _hp.evaluate(self.scalar, int(n), prec)

    def values(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        if self.const is not None:
            return np.full(rows.shape, complex(self.const))
        if self.vector is not None:
            return np.asarray(self.vector(rows), dtype=complex).reshape(rows.shape)
        return np.array([complex(self.scalar(int(n))) for n in rows], dtype=complex)

    def values_hp(self, rows, prec):
        out = np.empty(len(rows), dtype=object)
        if self.const is not None:
            c = _hp.evaluate(self.const, 0, prec)
            out[:] = [c] * len(rows)
            return out
        out[:] = [_hp.evaluate(self.scalar, int(n), prec) for n in rows]
        return out

    def scaled(self, s):
        if self.const is not None:
            return Band(self.const * s)
        f, vf = self.scalar, self.vector
        growth = None if self.growth is None else (self.growth[0] * abs(complex(s)), self.growth[1])
        return Band(
            scalar=lambda n: f(n) * s,
            vector=None if vf is None else (lambda rows: vf(rows) * complex(s)),
            growth=growth,
        )


def _add_bands(a, b):
    if a.const is not None and b.const is not None:
        return Band(a.const + b.const)
    fa, fb = a, b
    growth = None
    if a.growth is not None and b.growth is not None:
        growth = (a.growth[0] + b.growth[0], max(a.growth[1], b.growth[1]))
    return Band(
        scalar=lambda n: _scalar(fa, n) + _scalar(fb, n),
        vector=lambda rows: fa.values(rows) + fb.values(rows),
        growth=growth,
    )


def _scalar(band, n):
    return band.const if band.const is not None else band.scalar(n)


def _rows(dim, d):
    return np.arange(max(0, -d), min(dim, dim - d))


# ---------------------------------------------------------------------------
# BandedOperator
# ---------------------------------------------------------------------------


class BandedOperator:
    """Compression of a banded infinite matrix to the first ``dim`` indices.

    Parameters
    ----------
    dim : int
        Truncation size ``D``.
    bands : dict
        Offset ``d`` to a :class:`Band`, a constant or a callable.
    name : str, optional
        Label used in ``repr`` and reports.
    info : dict, optional
        Free-form metadata (for example growth-condition diagnostics).
    """

    def __init__(self, dim, bands, name=None, info=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError("dim must be positive")
        clean = {}
        for d, b in bands.items():
            b = Band.coerce(b)
            if not b.is_zero():
                clean[int(d)] = b
        self.bands = dict(sorted(clean.items()))
        self.name = name
        self.info = dict(info or {})
        self._cache = {}

    def __repr__(self):
        nm = self.name or "BandedOperator"
        return f"<{nm} dim={self.dim} offsets={self.offsets[:6]}{'...' if len(self.bands) > 6 else ''}>"

    @property
    def offsets(self):
        return list(self.bands)

    @property
    def bandwidth(self):
        live = [abs(d) for d in self.bands if abs(d) < self.dim]
        return max(live, default=0)

    @property
    def raise_width(self):
        """Largest number of steps by which the operator raises an index."""
        live = [-d for d in self.bands if d < 0 and -d < self.dim]
        return max(live, default=0)

    @property
    def lower_width(self):
        live = [d for d in self.bands if d > 0 and d < self.dim]
        return max(live, default=0)

    def is_lowering(self):
        """True when no band raises indices (all offsets ``>= 0``)."""
        return all(d >= 0 for d in self.bands)

    def is_raising(self):
        return all(d <= 0 for d in self.bands)

    def entry(self, n, m):
        """Matrix element ``(xi_n, A xi_m)``."""
        if not (0 <= n < self.dim and 0 <= m < self.dim):
            raise IndexError("entry outside truncation")
        b = self.bands.get(m - n)
        return 0j if b is None else b.at(n)

    def band_values(self, d):
        """Double-precision entries of band ``d`` on its rows in the truncation."""
        key = ("f", d)
        out = self._cache.get(key)
        if out is None:
            out = self.bands[d].values(_rows(self.dim, d))
            out.setflags(write=False)
            self._cache[key] = out
        return out

    def band_values_hp(self, d, prec):
        key = ("hp", d, prec)
        out = self._cache.get(key)
        if out is None:
            out = self.bands[d].values_hp(_rows(self.dim, d), prec)
            self._cache[key] = out
        return out

    def to_dense(self):
        """Dense ``dim x dim`` matrix (cached, read-only)."""
        out = self._cache.get("dense")
        if out is None:
            D = self.dim
            out = np.zeros((D, D), dtype=complex)
            for d in self.bands:
                rows = _rows(D, d)
                if rows.size:
                    out[rows, rows + d] = self.band_values(d)
            out.setflags(write=False)
            self._cache["dense"] = out
        return out

    @classmethod
    def from_dense(cls, M, name=None):
        """Operator whose generators read the entries of a dense matrix."""
        M = np.array(M, dtype=complex)
        D = M.shape[0]
        if M.shape != (D, D):
            raise ValueError("matrix must be square")
        bands = {}
        for d in range(-D + 1, D):
            diag = np.diagonal(M, offset=d).copy()
            if not np.any(diag):
                continue
            start = max(0, -d)

            def gen(n, diag=diag, start=start):
                i = n - start
                return complex(diag[i]) if 0 <= i < diag.size else 0j

            def vec(rows, diag=diag, start=start):
                i = rows - start
                ok = (i >= 0) & (i < diag.size)
                out = np.zeros(rows.shape, dtype=complex)
                out[ok] = diag[i[ok]]
                return out

            bands[d] = Band(scalar=gen, vector=vec, growth=(float(np.abs(diag).max()), 0.0))
        return cls(D, bands, name=name)

    def with_dim(self, dim):
        """Same generators on a different truncation."""
        return BandedOperator(dim, self.bands, name=self.name, info=self.info)

    # algebra --------------------------------------------------------------
    def apply(self, v):
        return apply(self, v)

    def adjoint(self):
        """Hermitian adjoint: band ``-d`` carries ``conj(a_d(n - d))``."""
        out = {}
        for d, b in self.bands.items():
            if b.const is not None:
                out[-d] = Band(_conj(b.const))
                continue
            f, vf, dd = b.scalar, b.vector, d

            def gen(n, f=f, dd=dd):
                return _conj(f(n - dd))

            def vec(rows, b=b, dd=dd):
                return np.conj(b.values(rows - dd))

            growth = None
            if b.growth is not None:
                G, p = b.growth
                growth = (G * (1 + abs(d)) ** p if d < 0 else G, p)
            out[-d] = Band(scalar=gen, vector=vec, growth=growth)
        nm = None if self.name is None else f"{self.name}^dag"
        return BandedOperator(self.dim, out, name=nm)

    def __add__(self, other):
        if not isinstance(other, BandedOperator):
            return NotImplemented
        _same_dim(self, other)
        out = dict(self.bands)
        for d, b in other.bands.items():
            out[d] = _add_bands(out[d], b) if d in out else b
        return BandedOperator(self.dim, out)

    def __neg__(self):
        return self.scaled(-1)

    def __sub__(self, other):
        if not isinstance(other, BandedOperator):
            return NotImplemented
        return self + (-other)

    def scaled(self, s):
        return BandedOperator(self.dim, {d: b.scaled(s) for d, b in self.bands.items()}, name=self.name)

    def __mul__(self, s):
        if isinstance(s, numbers.Number):
            return self.scaled(s)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, BandedOperator):
            return compose(self, other)
        if isinstance(other, FockVector):
            return apply(self, other)
        return NotImplemented

    def __call__(self, v):
        return apply(self, v)

    def sup_band_sum(self):
        """``sum_d sup_n |a_d(n)|``, an upper bound for the l^2 operator norm.

        Returns ``(bound, certified)``.  Bands without a bounded growth
        record are sampled over rows ``< 2 dim``, and ``certified`` is then
        false.
        """
        total = 0.0
        certified = True
        for d, b in self.bands.items():
            if b.growth is not None and b.growth[1] <= 0:
                total += b.growth[0]
            else:
                certified = False
                rows = _rows(2 * self.dim, d)
                total += float(np.abs(b.values(rows)).max()) if rows.size else 0.0
        return total, certified

    def to_csv(self, path):
        """Write the dense matrix row-major with ``re,im`` column pairs."""
        M = self.to_dense()
        D = self.dim
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            header = []
            for j in range(D):
                header += [f"re_{j}", f"im_{j}"]
            w.writerow(header)
            for i in range(D):
                row = []
                for z in M[i]:
                    row += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(row)


def _conj(x):
    if isinstance(x, (int, float, np.integer, np.floating)):
        return x
    if hasattr(x, "conjugate"):
        return x.conjugate()
    return np.conj(x)


def _same_dim(a, b):
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimensions differ: {a.dim} vs {b.dim}")


# ---------------------------------------------------------------------------
# operator kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeftShift:
    """``L xi_n = xi_{n-1}``, ``L Omega = 0``."""


@dataclass(frozen=True)
class RightShift:
    """``L* xi_n = xi_{n+1}``."""


@dataclass(frozen=True)
class Number:
    """``N xi_n = n xi_n``."""


@dataclass(frozen=True)
class Annihilate:
    """``a = sqrt(N+1) L``."""


@dataclass(frozen=True)
class Create:
    """``a* = L* sqrt(N+1)``."""


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class ProjOmega:
    """Projection onto the vacuum."""


@dataclass(frozen=True)
class ProjGeq2:
    """Projection onto span of ``xi_n``, ``n >= 2``."""


@dataclass(frozen=True)
class ProjEven:
    """Projection onto span of ``xi_{2n}``."""


@dataclass(frozen=True)
class Diagonal:
    """Diagonal operator ``g(N + shift)``.

    ``growth`` optionally records ``(G, p)`` with ``|g(n+shift)| <= G (n+1)**p``.
    """

    g: Callable
    shift: int = 0
    growth: Optional[tuple] = None


@dataclass(frozen=True)
class FactorialWeight:
    """Diagonal ``f!_k(N)``: the product of ``f(n - k m)`` over ``n - k m >= 1``.

    Equivalently ``f!_k(n) = f(n) f!_k(n - k)`` with value 1 for ``n <= 0``.
    On multiples of ``k`` this is ``prod_{i=1}^{j} f(i k)``, the weight that
    turns ``exp(alpha L*^k) Omega`` into ``exp(alpha f_N L*^k) Omega``.
    """

    f: Callable
    k: int = 1


def _sqrt(x):
    return gmpy2.sqrt(x)


def make(kind, D):
    """Truncated operator of a given kind.

    Parameters
    ----------
    kind : operator kind instance (or its class)
    D : int
        Truncation size.
    """
    if isinstance(kind, type):
        kind = kind()
    D = int(D)
    if isinstance(kind, LeftShift):
        return BandedOperator(D, {1: Band(1)}, name="L")
    if isinstance(kind, RightShift):
        return BandedOperator(D, {-1: Band(1)}, name="L*")
    if isinstance(kind, Identity):
        return BandedOperator(D, {0: Band(1)}, name="1")
    if isinstance(kind, Number):
        return BandedOperator(
            D, {0: Band(scalar=lambda n: n, vector=lambda r: r.astype(complex), growth=(1.0, 1.0))}, name="N"
        )
    if isinstance(kind, Annihilate):
        band = Band(
            scalar=lambda n: _sqrt(n + 1),
            vector=lambda r: np.sqrt(r + 1.0).astype(complex),
            growth=(1.0, 0.5),
        )
        return BandedOperator(D, {1: band}, name="a")
    if isinstance(kind, Create):
        band = Band(
            scalar=lambda n: _sqrt(n),
            vector=lambda r: np.sqrt(r.astype(float)).astype(complex),
            growth=(1.0, 0.5),
        )
        return BandedOperator(D, {-1: band}, name="a*")
    if isinstance(kind, ProjOmega):
        band = Band(scalar=lambda n: 1 if n == 0 else 0, vector=lambda r: (r == 0).astype(complex), growth=(1.0, 0.0))
        return BandedOperator(D, {0: band}, name="P_Omega")
    if isinstance(kind, ProjGeq2):
        band = Band(scalar=lambda n: 1 if n >= 2 else 0, vector=lambda r: (r >= 2).astype(complex), growth=(1.0, 0.0))
        return BandedOperator(D, {0: band}, name="P_>=2")
    if isinstance(kind, ProjEven):
        band = Band(
            scalar=lambda n: 1 if n % 2 == 0 else 0, vector=lambda r: (r % 2 == 0).astype(complex), growth=(1.0, 0.0)
        )
        return BandedOperator(D, {0: band}, name="P_even")
    if isinstance(kind, Diagonal):
        g, s = kind.g, int(kind.shift)
        return BandedOperator(D, {0: Band(scalar=lambda n: g(n + s), growth=kind.growth)}, name="g(N)")
    if isinstance(kind, FactorialWeight):
        f, k = kind.f, int(kind.k)

        def fact(n):
            out = 1
            while n >= 1:
                out = out * f(n)
                n -= k
            return out

        return BandedOperator(D, {0: Band(scalar=fact)}, name=f"f!_{k}(N)")
    raise TypeError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# application, composition, commutators
# ---------------------------------------------------------------------------


_DENSE_BANDS = 24


def _propagate_tail(A, v):
    t = v.tail
    if t is None:
        return None
    raise_w = max([-d for d in A.bands if d < 0], default=0)
    if t.C == 0.0 or (t.r == 0.0 and t.n0 >= 1):
        return TailBound(t.n0 + raise_w, 0.0, 0.0)
    total = 0.0
    p = 0.0
    for d, b in A.bands.items():
        if b.growth is None:
            return None
        G, pd = b.growth
        # |a_d(n)| |v_{n+d}| <= G (n+1)^pd C r^(n+d)
        total += G * (t.r ** d if t.r > 0 else (1.0 if d == 0 else 0.0))
        p = max(p, pd)
    if t.r == 0.0:
        return None
    base = TailBound(t.n0 + raise_w, t.C * total, t.r)
    return base.absorb_polynomial(p)


def apply(A, v):
    """Banded matrix-vector product ``A v`` on the truncation.

    Uses the extended-precision coefficients when ``v`` carries them.  The
    tail certificate is propagated when every band records a growth bound.
    """
    if A.dim != v.dim:
        raise DimensionMismatchError(f"operator dim {A.dim} vs vector dim {v.dim}")
    D = A.dim
    tail = _propagate_tail(A, v)
    if v.hp is not None:
        prec = v.prec
        out = _hp.zeros(D, prec)
        x = v.hp
        with _hp.working_precision(prec):
            for d in A.bands:
                rows = _rows(D, d)
                if rows.size == 0:
                    continue
                w = A.band_values_hp(d, prec)
                out[rows] = out[rows] + w * x[rows + d]
        return FockVector(None, tail, hp=out, prec=prec, check=False)
    x = v.coeffs
    if len(A.bands) > _DENSE_BANDS:
        # many bands: the cached dense matrix is faster than a band loop
        return FockVector(A.to_dense() @ x, tail, check=False)
    out = np.zeros(D, dtype=complex)
    for d in A.bands:
        rows = _rows(D, d)
        if rows.size:
            out[rows] += A.band_values(d) * x[rows + d]
    return FockVector(out, tail, check=False)


def _compose_band(pairs, d):
    """Band ``d`` of a product from ``(d1, a_band, b_band)`` triples."""
    lo = max(0, -d)
    if all(a.const is not None and b.const is not None and -d1 <= lo for d1, a, b in pairs):
        total = 0
        for _, a, b in pairs:
            total = total + a.const * b.const
        return Band(total)

    def gen(n):
        total = 0
        for d1, a, b in pairs:
            if n + d1 >= 0:
                total = total + _scalar(a, n) * _scalar(b, n + d1)
        return total

    def vec(rows):
        out = np.zeros(rows.shape, dtype=complex)
        for d1, a, b in pairs:
            ok = rows + d1 >= 0
            if np.any(ok):
                r = rows[ok]
                out[ok] += a.values(r) * b.values(r + d1)
        return out

    growth = None
    if all(a.growth is not None and b.growth is not None for _, a, b in pairs):
        G = sum(a.growth[0] * b.growth[0] * (1 + max(d1, 0)) ** b.growth[1] for d1, a, b in pairs)
        growth = (G, max(a.growth[1] + b.growth[1] for _, a, b in pairs))
    return Band(scalar=gen, vector=vec, growth=growth)


def compose(A, B):
    """Product ``A B`` as the compression of the infinite product.

    Band offsets add: ``(AB)_d(n) = sum a_{d1}(n) b_{d2}(n + d1)`` over
    ``d1 + d2 = d`` with intermediate index ``n + d1 >= 0``.  The
    intermediate index is not cut at ``dim``, which is what makes
    ``L L* = 1`` hold exactly.
    """
    _same_dim(A, B)
    groups = {}
    for d1, a in A.bands.items():
        for d2, b in B.bands.items():
            groups.setdefault(d1 + d2, []).append((d1, a, b))
    bands = {d: _compose_band(pairs, d) for d, pairs in groups.items()}
    nm = None
    if A.name and B.name:
        nm = f"{A.name}{B.name}"
    return BandedOperator(A.dim, bands, name=nm)


def power(A, k):
    """``A**k`` by repeated composition (``k = 0`` gives the identity)."""
    out = make(Identity(), A.dim)
    for _ in range(int(k)):
        out = compose(A, out)
    return out


def commutator_apply(A, B, v):
    """``A(Bv) - B(Av)`` computed on the truncation.

    Raises
    ------
    SupportOverflowError
        If the support of ``v`` plus the raising widths of ``A`` and ``B``
        reaches the truncation edge, where the compression would silently
        drop terms.
    """
    _same_dim(A, B)
    if A.dim != v.dim:
        raise DimensionMismatchError("operator and vector dims differ")
    top = v.support_max()
    if top + A.raise_width + B.raise_width >= v.dim:
        raise SupportOverflowError(
            f"support {top} + raising widths {A.raise_width}+{B.raise_width} "
            f"reaches truncation {v.dim}"
        )
    return apply(A, apply(B, v)) - apply(B, apply(A, v))


def operator_norm_estimate(A, *, rtol=1e-10, max_iter=20000, seed=0):
    """Largest singular value of the dense truncation by power iteration on ``A* A``.

    The start vector is drawn from ``Philox(seed)`` so the result is
    deterministic.  The iteration stops when the Rayleigh quotient changes
    by less than ``rtol`` relative.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations; diagnostics include the last two
        estimates.
    """
    M = A.to_dense()
    D = A.dim
    rng = make_rng(seed)
    x = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    x /= np.linalg.norm(x)
    MH = M.conj().T
    prev = None
    est = 0.0
    for it in range(1, max_iter + 1):
        y = MH @ (M @ x)
        est = float(np.real(np.vdot(x, y)))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if prev is not None and abs(est - prev) <= rtol * abs(est):
            return math.sqrt(max(ny, est))
        prev = est
    raise ConvergenceError(
        "power iteration did not converge",
        {"iterations": max_iter, "last": est, "previous": prev},
    )


def hermitian_norm(A, *, check_tol=0.0):
    """Operator norm of a Hermitian truncation as ``max |eigenvalue|``.

    Uses ``scipy.linalg.eigvalsh`` on the dense truncation, which is both
    faster and tighter than power iteration for self-adjoint matrices.

    Raises
    ------
    ValueError
        If ``A`` differs from its adjoint by more than ``check_tol``.
    """
    from scipy.linalg import eigvalsh

    M = A.to_dense() if isinstance(A, BandedOperator) else np.asarray(A)
    dev = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if dev > check_tol:
        raise ValueError(f"operator is not Hermitian (max |A - A*| = {dev:g})")
    e = eigvalsh(M)
    return float(max(abs(e[0]), abs(e[-1])))
