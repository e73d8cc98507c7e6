"""Truncated derivative jets.

A :class:`Jet` of order ``n`` stores ``f(q), f'(q), ..., f^(n)(q)`` (the
derivative convention, not Taylor coefficients).  Coefficients may carry
trailing batch dimensions, so one jet can describe many expansion points.
"""

from __future__ import annotations

from math import comb

import numpy as np


class Jet:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.ndim == 0:
            raise ValueError("a jet needs at least the value coefficient")
        self.coeffs = coeffs

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def value(self):
        return self.coeffs[0]

    def __getitem__(self, k):
        return self.coeffs[k]

    def __repr__(self):
        return f"Jet(order={self.order}, coeffs={self.coeffs!r})"

    @classmethod
    def constant(cls, c, order: int):
        c = np.asarray(c, dtype=float)
        out = np.zeros((order + 1,) + c.shape, dtype=np.result_type(c, float))
        out[0] = c
        return cls(out)

    @classmethod
    def variable(cls, q, order: int):
        """Jet of the identity map at ``q``."""
        q = np.asarray(q, dtype=float)
        out = np.zeros((order + 1,) + q.shape)
        out[0] = q
        if order >= 1:
            out[1] = 1.0
        return cls(out)

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError(f"jet orders differ: {self.order} vs {other.order}")
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        return Jet(self.coeffs + self._coerce(other).coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs)

    def __sub__(self, other):
        return Jet(self.coeffs - self._coerce(other).coeffs)

    def __rsub__(self, other):
        return Jet(self._coerce(other).coeffs - self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs * np.asarray(other))
        g = self._coerce(other).coeffs
        f = self.coeffs
        out = np.zeros(np.broadcast_shapes(f.shape, g.shape), dtype=np.result_type(f, g))
        for k in range(self.order + 1):
            out[k] = sum(comb(k, j) * f[j] * g[k - j] for j in range(k + 1))
        return Jet(out)

    __rmul__ = __mul__

    def exp(self) -> "Jet":
        """Jet of ``exp(u)`` from the jet of ``u``.

        Uses ``h' = u' h``, i.e. ``h^(k+1) = sum_j C(k, j) u^(j+1) h^(k-j)``.
        """
        u = self.coeffs
        h = np.zeros_like(u, dtype=np.result_type(u, float))
        h[0] = np.exp(u[0])
        for k in range(self.order):
            h[k + 1] = sum(comb(k, j) * u[j + 1] * h[k - j] for j in range(k + 1))
        return Jet(h)

    def derivative(self) -> "Jet":
        """Jet of ``f'`` (one order lower)."""
        return Jet(self.coeffs[1:])
