"""Vectorized double-double arithmetic.

An :class:`ExtendedReal` holds a pair of float64 arrays ``(hi, lo)`` whose
unevaluated sum represents a real number with roughly 32 significant
digits.  All arithmetic broadcasts like numpy, so a single object can stand
for a scalar, a vector or a matrix of extended reals.

The error-free transformations follow Dekker and Knuth; division and the
exponential follow the usual QD-library recipes.  No fused multiply-add is
assumed.
"""

from __future__ import annotations

import math

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1
_LN2 = (0.6931471805599453, 2.3190468138462996e-17)
_EXP_SQUARINGS = 9
_EXP_TERMS = 12


def two_sum(a, b):
    """Return ``(s, e)`` with ``s = fl(a + b)`` and ``a + b = s + e`` exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def quick_two_sum(a, b):
    """As :func:`two_sum`, assuming ``|a| >= |b|``."""
    s = a + b
    e = b - (s - a)
    return s, e


def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    """Return ``(p, e)`` with ``p = fl(a * b)`` and ``a * b = p + e`` exactly."""
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _as_pair(x):
    if isinstance(x, ExtendedReal):
        return x.hi, x.lo
    x = np.asarray(x, dtype=np.float64)
    return x, np.zeros_like(x)


class ExtendedReal:
    """A double-double real, or an array of them.

    Parameters
    ----------
    hi, lo : array_like
        Leading and trailing words.  The pair is renormalized on
        construction so that ``|lo| <= ulp(hi) / 2``.
    """

    __slots__ = ("hi", "lo")
    __array_priority__ = 1000

    def __init__(self, hi, lo=None):
        hi = np.asarray(hi, dtype=np.float64)
        if lo is None:
            self.hi = hi
            self.lo = np.zeros_like(hi)
            return
        lo = np.asarray(lo, dtype=np.float64)
        with np.errstate(invalid="ignore"):
            s, e = quick_two_sum(hi, lo)
            bad = ~np.isfinite(s)
            if np.any(bad):
                s = np.where(bad, hi + lo, s)
                e = np.where(bad, 0.0, e)
        self.hi = s
        self.lo = e

    @classmethod
    def _raw(cls, hi, lo):
        obj = cls.__new__(cls)
        obj.hi = hi
        obj.lo = lo
        return obj

    @classmethod
    def zeros(cls, shape):
        return cls._raw(np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_product(cls, a, b):
        """Exact product of two float arrays as an extended real."""
        p, e = two_prod(np.asarray(a, dtype=np.float64),
                        np.asarray(b, dtype=np.float64))
        return cls._raw(p, e)

    @classmethod
    def from_difference(cls, a, b):
        """Exact difference of two float arrays as an extended real."""
        s, e = two_sum(np.asarray(a, dtype=np.float64),
                       -np.asarray(b, dtype=np.float64))
        return cls._raw(s, e)

    # -- array protocol -------------------------------------------------
    @property
    def shape(self):
        return self.hi.shape

    @property
    def ndim(self):
        return self.hi.ndim

    def __len__(self):
        return len(self.hi)

    def __getitem__(self, key):
        return ExtendedReal._raw(self.hi[key], self.lo[key])

    def __setitem__(self, key, value):
        hi, lo = _as_pair(value)
        self.hi[key] = hi
        self.lo[key] = lo

    def copy(self):
        return ExtendedReal._raw(self.hi.copy(), self.lo.copy())

    def reshape(self, *shape):
        return ExtendedReal._raw(self.hi.reshape(*shape), self.lo.reshape(*shape))

    @property
    def T(self):
        return ExtendedReal._raw(self.hi.T, self.lo.T)

    def __float__(self):
        return float(self.hi + self.lo)

    def to_float(self):
        """Round to float64 (array or scalar)."""
        return self.hi + self.lo

    def __repr__(self):
        return f"ExtendedReal(hi={self.hi!r}, lo={self.lo!r})"

    # -- arithmetic -----------------------------------------------------
    def __neg__(self):
        return ExtendedReal._raw(-self.hi, -self.lo)

    def __abs__(self):
        neg = (self.hi < 0) | ((self.hi == 0) & (self.lo < 0))
        return ExtendedReal._raw(np.where(neg, -self.hi, self.hi),
                                 np.where(neg, -self.lo, self.lo))

    def __add__(self, other):
        bh, bl = _as_pair(other)
        s, e = two_sum(self.hi, bh)
        t, f = two_sum(self.lo, bl)
        e = e + t
        s, e = quick_two_sum(s, e)
        e = e + f
        s, e = quick_two_sum(s, e)
        return ExtendedReal._raw(s, e)

    __radd__ = __add__

    def __sub__(self, other):
        bh, bl = _as_pair(other)
        return self + ExtendedReal._raw(-bh, -bl)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        bh, bl = _as_pair(other)
        p, e = two_prod(self.hi, bh)
        e = e + (self.hi * bl + self.lo * bh)
        p, e = quick_two_sum(p, e)
        return ExtendedReal._raw(p, e)

    __rmul__ = __mul__

    def __truediv__(self, other):
        b = other if isinstance(other, ExtendedReal) else ExtendedReal(other)
        with np.errstate(divide="ignore", invalid="ignore"):
            q1 = self.hi / b.hi
            r = self - b * q1
            q2 = r.hi / b.hi
            r = r - b * q2
            q3 = r.hi / b.hi
            q1, q2 = quick_two_sum(q1, q2)
            out = ExtendedReal._raw(q1, q2) + q3
        bad = ~np.isfinite(q1)
        if np.any(bad):
            out.hi = np.where(bad, q1, out.hi)
            out.lo = np.where(bad, 0.0, out.lo)
        return out

    def __rtruediv__(self, other):
        return ExtendedReal(other) / self

    def square(self):
        return self * self

    def scale(self, power_of_two):
        """Multiply by ``2**power_of_two`` exactly."""
        return ExtendedReal._raw(np.ldexp(self.hi, power_of_two),
                                 np.ldexp(self.lo, power_of_two))

    # -- comparisons (lexicographic on the normalized pair) ---------------
    def _cmp_key(self, other):
        bh, bl = _as_pair(other)
        d = self - ExtendedReal._raw(bh, bl)
        return d.hi

    def __lt__(self, other):
        return self._cmp_key(other) < 0

    def __le__(self, other):
        return self._cmp_key(other) <= 0

    def __gt__(self, other):
        return self._cmp_key(other) > 0

    def __ge__(self, other):
        return self._cmp_key(other) >= 0

    # -- reductions -----------------------------------------------------
    def sum(self, axis=None):
        """Sum along ``axis`` (all elements when ``None``) in extended precision."""
        if axis is None:
            flat = self.reshape(-1)
            return flat.sum(axis=0)
        hi = np.moveaxis(self.hi, axis, 0)
        lo = np.moveaxis(self.lo, axis, 0)
        acc = ExtendedReal._raw(np.zeros(hi.shape[1:]), np.zeros(hi.shape[1:]))
        for k in range(hi.shape[0]):
            acc = acc + ExtendedReal._raw(hi[k], lo[k])
        return acc

    def prod(self, axis=None):
        if axis is None:
            return self.reshape(-1).prod(axis=0)
        hi = np.moveaxis(self.hi, axis, 0)
        lo = np.moveaxis(self.lo, axis, 0)
        acc = ExtendedReal._raw(np.ones(hi.shape[1:]), np.zeros(hi.shape[1:]))
        for k in range(hi.shape[0]):
            acc = acc * ExtendedReal._raw(hi[k], lo[k])
        return acc

    # -- elementary functions ---------------------------------------------
    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


def _expm1_reduced(r):
    # Taylor series of e^r - 1 for |r| <= ln(2)/2**(_EXP_SQUARINGS+1).
    term = r
    s = r
    for k in range(2, _EXP_TERMS):
        term = term * r / float(k)
        s = s + term
    return s


def exp(x):
    """Extended-precision exponential.

    Uses ``x = k ln 2 + r``, scales ``r`` down by ``2**9``, sums the Taylor
    series of ``expm1`` and squares back via ``s -> 2 s + s**2`` so that the
    leading ``1`` never swamps the correction.
    """
    if not isinstance(x, ExtendedReal):
        x = ExtendedReal(x)
    hi = x.hi
    with np.errstate(over="ignore", invalid="ignore"):
        k = np.rint(hi / _LN2[0])
        k = np.where(np.isfinite(k), k, 0.0)
        k = np.clip(k, -1100.0, 1100.0)
        r = x - ExtendedReal.from_product(k, _LN2[0]) - ExtendedReal(k * _LN2[1])
        r = r.scale(-_EXP_SQUARINGS)
        s = _expm1_reduced(r)
        for _ in range(_EXP_SQUARINGS):
            s = s * (s + 2.0)
        e = s + 1.0
        ki = k.astype(np.int64)
        # ldexp in two steps keeps intermediate values finite near the edges
        half = ki // 2
        out = ExtendedReal._raw(np.ldexp(np.ldexp(e.hi, half), ki - half),
                                np.ldexp(np.ldexp(e.lo, half), ki - half))
    big = hi > 709.78
    small = hi < -745.2
    if np.any(big) or np.any(small) or np.any(~np.isfinite(hi)):
        out.hi = np.where(big, np.inf, np.where(small, 0.0, out.hi))
        out.lo = np.where(big | small, 0.0, out.lo)
        nan = np.isnan(hi)
        out.hi = np.where(nan, np.nan, out.hi)
    return out


def log(x):
    """Extended-precision natural logarithm (one Newton step on ``exp``)."""
    if not isinstance(x, ExtendedReal):
        x = ExtendedReal(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = ExtendedReal(np.log(x.hi))
        return y + x * exp(-y) - 1.0


def as_extended(x) -> ExtendedReal:
    if isinstance(x, ExtendedReal):
        return x
    return ExtendedReal(np.asarray(x, dtype=np.float64))


def stack(items, axis=0):
    his = [as_extended(i).hi for i in items]
    los = [as_extended(i).lo for i in items]
    return ExtendedReal._raw(np.stack(his, axis=axis), np.stack(los, axis=axis))


def matvec(a: ExtendedReal, x: ExtendedReal) -> ExtendedReal:
    """``a @ x`` for a matrix ``a`` (m, n) and vector or matrix ``x``."""
    x = as_extended(x)
    n = a.shape[1]
    if x.ndim == 1:
        acc = ExtendedReal.zeros(a.shape[0])
        for k in range(n):
            acc = acc + a[:, k] * x[k]
        return acc
    acc = ExtendedReal.zeros((a.shape[0], x.shape[1]))
    for k in range(n):
        acc = acc + a[:, k:k + 1] * x[k:k + 1, :]
    return acc


def factorial(n: int) -> ExtendedReal:
    """``n!`` as an extended real (exact below 2**106)."""
    v = math.factorial(n)
    hi = float(v)
    lo = float(v - int(hi))
    return ExtendedReal(hi, lo)
