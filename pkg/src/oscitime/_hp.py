"""Extended-precision helpers backed by gmpy2 object arrays.

The logarithm series applied to eigenvectors of non-normal shift-type
operators amplifies rounding errors geometrically, so those series run on
arrays of ``gmpy2.mpc`` numbers.  gmpy2 contexts are thread-local; mpmath
keeps a global precision, so calls that may use mpmath are serialized.
"""

import contextlib
import math
import numbers
import threading
import warnings
from fractions import Fraction

import gmpy2
import mpmath
import numpy as np

from .errors import PrecisionWarning

__all__ = [
    "working_precision",
    "to_mpc",
    "evaluate",
    "zeros",
    "asarray",
    "to_complex",
    "norm",
    "required_precision",
]

_MPMATH_LOCK = threading.RLock()
_FLOAT_WARNED = set()


@contextlib.contextmanager
def working_precision(prec):
    """Run the enclosed block with gmpy2 precision ``prec`` (in bits)."""
    ctx = gmpy2.context(
        gmpy2.get_context(), precision=prec, real_prec=prec, imag_prec=prec
    )
    with ctx:
        yield


def _mpf_to_mpfr(x):
    sign, man, exp, _ = x._mpf_
    if not man:
        if x == 0:
            return gmpy2.mpfr(0)
        raise ValueError(f"cannot convert non-finite value {x!r}")
    value = gmpy2.mul_2exp(gmpy2.mpfr(int(man)), int(exp))
    return -value if sign else value


def to_mpc(x):
    """Convert a scalar to ``gmpy2.mpc`` at the current precision.

    Integers, fractions, floats, gmpy2 and mpmath numbers convert exactly
    (up to rounding to the working precision).
    """
    if isinstance(x, type(gmpy2.mpc(0))):
        return gmpy2.mpc(x)
    if isinstance(x, (int, np.integer)):
        return gmpy2.mpc(gmpy2.mpfr(int(x)))
    if isinstance(x, Fraction):
        return gmpy2.mpc(gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator)))
    if isinstance(x, mpmath.mpf):
        return gmpy2.mpc(_mpf_to_mpfr(x))
    if isinstance(x, mpmath.mpc):
        return gmpy2.mpc(_mpf_to_mpfr(x.real), _mpf_to_mpfr(x.imag))
    if isinstance(x, (type(gmpy2.mpfr(0)), type(gmpy2.mpq(0)), type(gmpy2.mpz(0)))):
        return gmpy2.mpc(gmpy2.mpfr(x))
    if isinstance(x, numbers.Real):
        return gmpy2.mpc(gmpy2.mpfr(float(x)))
    if isinstance(x, numbers.Complex):
        z = complex(x)
        return gmpy2.mpc(gmpy2.mpfr(z.real), gmpy2.mpfr(z.imag))
    raise TypeError(f"cannot convert {type(x).__name__} to mpc")


def _is_inexact_double(v):
    if isinstance(v, (float, np.floating)):
        return not float(v).is_integer()
    if isinstance(v, (complex, np.complexfloating)):
        return not (float(v.real).is_integer() and float(v.imag).is_integer())
    return False


def evaluate(fn, n, prec=None):
    """Evaluate a scalar generator at integer ``n``.

    Parameters
    ----------
    fn : callable or number
        Generator; called with a Python ``int``.
    n : int
        Row index.
    prec : int or None
        ``None`` gives a Python complex.  Otherwise the call runs under
        gmpy2 and mpmath working precision ``prec`` and the result is an
        ``mpc``.  Generators written with ``gmpy2`` or ``mpmath``
        functions therefore yield full-precision values.
    """
    if prec is None:
        value = fn(n) if callable(fn) else fn
        return complex(value)
    with working_precision(prec):
        if not callable(fn):
            return to_mpc(fn)
        with _MPMATH_LOCK, mpmath.workprec(prec):
            value = fn(n)
        if _is_inexact_double(value):
            key = getattr(fn, "__qualname__", repr(fn))
            if key not in _FLOAT_WARNED:
                _FLOAT_WARNED.add(key)
                warnings.warn(
                    f"generator {key} returned a double while {prec}-bit "
                    "precision was requested; use mpmath or gmpy2 functions",
                    PrecisionWarning,
                    stacklevel=3,
                )
        return to_mpc(value)


def zeros(n, prec):
    """Object array of ``n`` zeros at precision ``prec``."""
    with working_precision(prec):
        out = np.empty(n, dtype=object)
        out[:] = [gmpy2.mpc(0) for _ in range(n)]
    return out


def asarray(values, prec):
    """Convert an iterable of scalars to an ``mpc`` object array."""
    with working_precision(prec):
        items = [to_mpc(v) for v in values]
    out = np.empty(len(items), dtype=object)
    out[:] = items
    return out


def to_complex(arr):
    """Round an ``mpc`` object array to ``complex128``."""
    return np.array([complex(z) for z in arr], dtype=complex)


def norm(arr):
    """Euclidean norm of an ``mpc`` array as a float."""
    total = gmpy2.mpfr(0)
    for z in arr:
        total += gmpy2.norm(z)
    return float(gmpy2.sqrt(total))


def required_precision(amplification, tol, floor=128, cap=4096):
    """Bits needed so rounding amplified by ``amplification`` stays below ``tol``.

    Parameters
    ----------
    amplification : float
        Base-2 logarithm of the worst-case error growth.
    tol : float
        Target absolute accuracy.
    """
    bits = 53 + amplification + math.log2(1.0 / tol) + 32
    return int(min(cap, max(floor, math.ceil(bits / 32.0) * 32)))
