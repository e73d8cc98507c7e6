"""Small dense linear algebra at standard or extended precision.

Extended precision is real-only: every ill-conditioned system in this
package (kernel, exponential and Vandermonde-like matrices) is real.
Complex matrices are handled in float64.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import NotHermitian, SingularMatrix
from .dd import ExtendedReal, as_extended, matvec

EXTENDED_PIVOT_FLOOR = 1e-60
STANDARD_PIVOT_RTOL = 1e-14


def _magnitude(m):
    if isinstance(m, ExtendedReal):
        return np.abs(m.hi)
    return np.abs(m)


def _swap_rows(m, i, j):
    if isinstance(m, ExtendedReal):
        m.hi[[i, j]] = m.hi[[j, i]]
        m.lo[[i, j]] = m.lo[[j, i]]
    else:
        m[[i, j]] = m[[j, i]]


def _swap_cols(m, i, j):
    if isinstance(m, ExtendedReal):
        m.hi[:, [i, j]] = m.hi[:, [j, i]]
        m.lo[:, [i, j]] = m.lo[:, [j, i]]
    else:
        m[:, [i, j]] = m[:, [j, i]]


class LUDecomposition:
    """Full-pivot Gaussian elimination ``A[p][:, q] = L U``.

    ``precision='extended'`` requires a real matrix and works in
    double-double; ``'standard'`` accepts real or complex float64 input.
    The factorization is reused for any number of right-hand sides.
    """

    def __init__(self, a, precision: str = "extended"):
        if precision not in ("standard", "extended"):
            raise ValueError(f"unknown precision {precision!r}")
        self.precision = precision
        if precision == "extended":
            if not isinstance(a, ExtendedReal) and np.iscomplexobj(a):
                raise TypeError("extended precision supports real matrices only")
            lu = as_extended(a).copy()
        else:
            if isinstance(a, ExtendedReal):
                a = a.to_float()
            a = np.asarray(a)
            lu = np.array(a, dtype=np.result_type(a, np.float64), copy=True)
        if lu.ndim != 2 or lu.shape[0] != lu.shape[1]:
            raise ValueError(f"square matrix required, got shape {lu.shape}")
        n = lu.shape[0]
        self.n = n
        self.norm = float(np.max(np.sum(_magnitude(lu), axis=1))) if n else 0.0
        if precision == "extended":
            self.floor = EXTENDED_PIVOT_FLOOR
        else:
            self.floor = STANDARD_PIVOT_RTOL * self.norm
        rows = np.arange(n)
        cols = np.arange(n)
        swaps = 0
        self.singular = False
        self.min_pivot = np.inf
        for k in range(n):
            block = _magnitude(lu[k:, k:])
            i, j = np.unravel_index(np.argmax(block), block.shape)
            i += k
            j += k
            if i != k:
                _swap_rows(lu, k, i)
                rows[[k, i]] = rows[[i, k]]
                swaps += 1
            if j != k:
                _swap_cols(lu, k, j)
                cols[[k, j]] = cols[[j, k]]
                swaps += 1
            pivot_mag = float(_magnitude(lu[k, k]))
            self.min_pivot = min(self.min_pivot, pivot_mag)
            if pivot_mag < self.floor:
                self.singular = True
                break
            if k + 1 < n:
                mult = lu[k + 1:, k] / lu[k, k]
                lu[k + 1:, k] = mult
                lu[k + 1:, k + 1:] = lu[k + 1:, k + 1:] - mult[:, None] * lu[k, k + 1:][None, :]
        self.lu = lu
        self.rows = rows
        self.cols = cols
        self.sign = -1 if swaps % 2 else 1

    def _require_regular(self):
        if self.singular:
            raise SingularMatrix(
                f"pivot magnitude {self.min_pivot:.3e} below floor {self.floor:.3e} "
                f"({self.precision} precision)", pivot=self.min_pivot)

    def solve(self, b):
        """Solve ``A x = b`` for a vector or a matrix of right-hand sides."""
        self._require_regular()
        n = self.n
        lu = self.lu
        if self.precision == "extended":
            y = as_extended(b)[self.rows].copy()
        else:
            b = np.asarray(b)
            y = np.array(b[self.rows], dtype=np.result_type(b, lu.dtype))
        vector = y.ndim == 1
        if vector:
            y = y.reshape(n, 1)
        for k in range(1, n):
            y[k] = y[k] - (lu[k, :k][:, None] * y[:k]).sum(axis=0)
        for k in range(n - 1, -1, -1):
            if k + 1 < n:
                acc = y[k] - (lu[k, k + 1:][:, None] * y[k + 1:]).sum(axis=0)
            else:
                acc = y[k]
            y[k] = acc / lu[k, k]
        x = y.copy()
        x[self.cols] = y
        if vector:
            x = x.reshape(n)
        return x

    def determinant(self):
        if self.singular:
            return ExtendedReal(0.0) if self.precision == "extended" else 0.0
        idx = np.arange(self.n)
        diag = self.lu[idx, idx]
        if self.precision == "extended":
            return diag.prod() * float(self.sign)
        return np.prod(diag) * self.sign


def residual_norm(a, x, b) -> float:
    """``||A x - b||_inf``; extended precision if any operand is extended."""
    if any(isinstance(v, ExtendedReal) for v in (a, x, b)):
        r = matvec(as_extended(a), as_extended(x)) - as_extended(b)
        return float(np.max(np.abs(r.to_float()))) if r.shape[0] else 0.0
    r = np.asarray(a) @ np.asarray(x) - np.asarray(b)
    return float(np.max(np.abs(r))) if r.size else 0.0


def solve_linear(a, b, precision: str = "extended"):
    """Solve a square system by full-pivot elimination.

    Parameters
    ----------
    a : array_like or ExtendedReal
        Square matrix.  Complex input needs ``precision='standard'``.
    b : array_like or ExtendedReal
        Right-hand side, conformable with ``a``.
    precision : {'extended', 'standard'}

    Returns
    -------
    x : ExtendedReal or ndarray
        The solution (``ExtendedReal`` for extended precision).
    residual : float
        ``||A x - b||_inf``.

    Raises
    ------
    SingularMatrix
        A pivot fell below ``1e-60`` (extended) or ``1e-14 ||A||`` (standard).
    """
    lu = LUDecomposition(a, precision)
    if len(b) != lu.n:
        raise ValueError("right-hand side is not conformable")
    x = lu.solve(b)
    if precision == "standard":
        a = a.to_float() if isinstance(a, ExtendedReal) else np.asarray(a)
        b = b.to_float() if isinstance(b, ExtendedReal) else np.asarray(b)
    return x, residual_norm(a, x, b)


def determinant(a, precision: str = "extended"):
    """Determinant via pivoted elimination with exact sign tracking."""
    return LUDecomposition(a, precision).determinant()


def eig_hermitian(m, tol: float = 1e-12):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    Backed by LAPACK (``numpy.linalg.eigh``).  Eigenvector phases are
    whatever LAPACK returns; callers must not rely on them.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("square matrix required")
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    asym = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if asym > tol * max(scale, np.finfo(float).tiny):
        raise NotHermitian(f"||M - M^H|| = {asym:.3e} exceeds {tol:g} ||M||")
    w, v = np.linalg.eigh(m)
    return w, v


def vandermonde_product(x) -> ExtendedReal:
    """``prod_{k<l} (x_l - x_k)`` in extended precision."""
    x = np.asarray(x, dtype=np.float64)
    acc = ExtendedReal(1.0)
    for l in range(len(x)):
        for k in range(l):
            acc = acc * ExtendedReal.from_difference(x[l], x[k])
    return acc
