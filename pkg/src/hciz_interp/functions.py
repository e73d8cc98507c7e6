"""Catalog of analytic test functions with exact derivative jets.

Every entry exposes closed-form derivatives of any order (up to
:data:`MAX_ORDER`), a complex evaluator for contour integrals, and the
list of its poles, from which the distance to the nearest singularity is
computed for any real interval.

Catalog ids follow ``name[:param[,param...]]``::

    exp:t                 e^{t x}
    poly:c0,c1,...,cd     c0 + c1 x + ... + cd x^d
    rational-pole:s       1 / (x^2 + s^2)
    neg-rational-pole:s   -1 / (x^2 + s^2)
    runge                 1 / (1 + 25 x^2)
    gauss-shift:mu        exp(-(x - mu)^2 / 2)
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .exceptions import OrderTooLarge, SingularityTooClose, UnknownFunction
from .numerics.dd import ExtendedReal, exp as dd_exp
from .numerics.jet import Jet

MAX_ORDER = 64

JetFn = Callable[[np.ndarray, int], np.ndarray]


class AnalyticFunction:
    """A real-analytic function with exact jets.

    Parameters
    ----------
    id : str
        Catalog id (or any descriptive label for user functions).
    jet : callable
        ``jet(q, order)`` returning an array of shape ``(order + 1,) + q.shape``
        holding ``f(q), f'(q), ..., f^(order)(q)``.
    complex_eval : callable
        ``f(z)`` for complex ``z``; needed only for contour bounds.
    poles : sequence of complex
        Singularities of the analytic continuation.  Entire functions pass
        an empty sequence.  User functions must declare these.
    extended_eval : callable, optional
        ``f(q)`` as an :class:`ExtendedReal`, used to feed interpolation
        data that is accurate beyond float64.
    """

    def __init__(self, id: str, jet: JetFn, complex_eval: Callable[[np.ndarray], np.ndarray],
                 poles: Sequence[complex] = (), extended_eval=None):
        self.id = id
        self._jet = jet
        self._complex = complex_eval
        self._extended = extended_eval
        self.poles = tuple(complex(p) for p in poles)

    def __repr__(self):
        return f"AnalyticFunction({self.id!r})"

    def eval(self, q):
        q = np.asarray(q, dtype=float)
        return self._jet(q, 0)[0]

    __call__ = eval

    def eval_jet(self, q, order: int) -> Jet:
        if order < 0:
            raise ValueError("order must be >= 0")
        if order > MAX_ORDER:
            raise OrderTooLarge(f"jet order {order} exceeds {MAX_ORDER}")
        return Jet(self._jet(np.asarray(q, dtype=float), order))

    def eval_extended(self, q) -> ExtendedReal:
        """Values in double-double when available, else float64 promoted."""
        q = np.asarray(q, dtype=float)
        if self._extended is None:
            return ExtendedReal(self.eval(q))
        return self._extended(q)

    def eval_complex(self, z):
        return self._complex(np.asarray(z, dtype=complex))

    def analyticity_distance(self, interval) -> float:
        """Distance from ``[a, b]`` to the nearest pole (``inf`` if entire)."""
        a, b = interval
        best = math.inf
        for p in self.poles:
            x = min(max(p.real, a), b)
            best = min(best, abs(p - x))
        return best


def _exp_fn(t: float) -> AnalyticFunction:
    def jet(q, order):
        e = np.exp(t * q)
        return np.stack([t ** k * e for k in range(order + 1)])

    return AnalyticFunction(f"exp:{t:g}", jet, lambda z: np.exp(t * z),
                            extended_eval=lambda q: dd_exp(ExtendedReal.from_product(t, q)))


def _poly_fn(coeffs: Sequence[float]) -> AnalyticFunction:
    c = np.asarray(coeffs, dtype=float)

    def jet(q, order):
        out = []
        d = c
        for _ in range(order + 1):
            out.append(P.polyval(q, d) if d.size else np.zeros_like(q))
            d = P.polyder(d) if d.size > 1 else np.zeros(0)
        return np.stack(out)

    def extended(q):
        acc = ExtendedReal(np.zeros_like(q))
        for ck in c[::-1]:
            acc = acc * q + float(ck)
        return acc

    label = ",".join(f"{v:g}" for v in c)
    return AnalyticFunction(f"poly:{label}", jet, lambda z: P.polyval(z, c),
                            extended_eval=extended)


def _pole_pair(s: float, scale: float, label: str, extended=None) -> AnalyticFunction:
    # scale / (x^2 + s^2) = scale * Im[1 / (x - i s)] / s
    def jet(q, order):
        w = q - 1j * s
        out = []
        for k in range(order + 1):
            out.append(scale * ((-1) ** k * math.factorial(k) * w ** (-k - 1)).imag / s)
        return np.stack(out)

    if extended is None:
        def extended(q):
            return scale / (ExtendedReal.from_product(q, q) + ExtendedReal.from_product(s, s))

    return AnalyticFunction(label, jet, lambda z: scale / (z * z + s * s),
                            poles=(1j * s, -1j * s), extended_eval=extended)


def _gauss_shift_fn(mu: float) -> AnalyticFunction:
    def jet(q, order):
        u = q - mu
        g = np.exp(-0.5 * u * u)
        # d^k/du^k e^{-u^2/2} = (-1)^k He_k(u) e^{-u^2/2}
        he_prev = np.ones_like(u)
        he = u
        out = [g]
        for k in range(1, order + 1):
            if k == 1:
                cur = he
            else:
                he_prev, he = he, u * he - (k - 1) * he_prev
                cur = he
            out.append((-1) ** k * cur * g)
        return np.stack(out)

    def extended(q):
        u = ExtendedReal.from_difference(q, mu)
        return dd_exp(-(u * u).scale(-1))

    return AnalyticFunction(f"gauss-shift:{mu:g}", jet, lambda z: np.exp(-0.5 * (z - mu) ** 2),
                            extended_eval=extended)


def _params(spec: str, name: str, count: int | None) -> list[float]:
    if not spec:
        if count == 0:
            return []
        raise UnknownFunction(f"{name!r} needs parameters")
    try:
        vals = [float(v) for v in spec.split(",")]
    except ValueError as exc:
        raise UnknownFunction(f"bad parameters {spec!r} for {name!r}") from exc
    if count is not None and len(vals) != count:
        raise UnknownFunction(f"{name!r} takes {count} parameter(s), got {len(vals)}")
    return vals


CATALOG = ("exp", "poly", "rational-pole", "neg-rational-pole", "runge", "gauss-shift")


def from_id(spec: str) -> AnalyticFunction:
    """Build a catalog function from its id string, e.g. ``"rational-pole:5"``."""
    name, _, params = spec.strip().partition(":")
    if name == "exp":
        (t,) = _params(params, name, 1)
        return _exp_fn(t)
    if name == "poly":
        return _poly_fn(_params(params, name, None))
    if name in ("rational-pole", "neg-rational-pole"):
        (s,) = _params(params, name, 1)
        if s <= 0:
            raise UnknownFunction("pole offset s must be positive")
        return _pole_pair(s, 1.0 if name == "rational-pole" else -1.0, f"{name}:{s:g}")
    if name == "runge":
        _params(params, name, 0)
        return _pole_pair(0.2, 1.0 / 25.0, "runge",
                          extended=lambda q: 1.0 / (ExtendedReal.from_product(q, q) * 25.0 + 1.0))
    if name == "gauss-shift":
        (mu,) = _params(params, name, 1)
        return _gauss_shift_fn(mu)
    raise UnknownFunction(f"unknown function {name!r}; valid names: {', '.join(CATALOG)}")


def modulate_gaussian(f: AnalyticFunction, sign: int) -> AnalyticFunction:
    """Return ``x -> exp(sign * x^2 / 2) * f(x)``.

    Jets are formed by the jet exponential of ``sign * q^2 / 2`` times the
    jet of ``f`` (Leibniz rule).  Poles, hence analyticity distances, are
    unchanged.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")

    def jet(q, order):
        x = Jet.variable(q, order)
        weight = (x * x * (0.5 * sign)).exp()
        return (weight * Jet(f._jet(q, order))).coeffs

    def complex_eval(z):
        return np.exp(0.5 * sign * z * z) * f._complex(z)

    def extended(q):
        return dd_exp(ExtendedReal.from_product(q, q).scale(-1) * float(sign)) * f.eval_extended(q)

    tag = "+" if sign > 0 else "-"
    return AnalyticFunction(f"modulate{tag}({f.id})", jet, complex_eval, poles=f.poles,
                            extended_eval=extended)


def _stadium_pieces(a: float, b: float, r: float, n: int, level: int = 0):
    """Nodes and weights of composite trapezoid rules on the four stadium pieces."""
    length = b - a
    perimeter = 2.0 * length + 2.0 * math.pi * r
    pieces = []
    for kind, piece_len in (("bottom", length), ("right", math.pi * r),
                            ("top", length), ("left", math.pi * r)):
        if piece_len <= 0:
            continue
        m = max(8, int(math.ceil(n * piece_len / perimeter))) << level
        s = np.linspace(0.0, 1.0, m + 1)
        w = np.full(m + 1, piece_len / m)
        w[[0, -1]] *= 0.5
        if kind == "bottom":
            z = a + s * length - 1j * r
        elif kind == "top":
            z = b - s * length + 1j * r
        elif kind == "right":
            z = b + r * np.exp(1j * (-0.5 * math.pi + math.pi * s))
        else:
            z = a + r * np.exp(1j * (0.5 * math.pi + math.pi * s))
        pieces.append((z, w))
    return pieces


def _stadium_trapezoid(f: AnalyticFunction, a: float, b: float, r: float, n: int,
                       level: int = 0) -> float:
    pieces = _stadium_pieces(a, b, r, n, level)
    return float(sum(np.sum(w * np.abs(f.eval_complex(z))) for z, w in pieces))


def contour_integral_estimate(f: AnalyticFunction, interval, rho_prime: float,
                              points: int = 2048, rtol: float = 1e-6,
                              max_points: int = 1 << 20) -> tuple[float, float]:
    """Richardson-extrapolated ``oint |f(z)| |dz|`` over a stadium contour.

    The contour consists of the segments ``[a, b] -/+ i rho'`` joined by
    semicircles of radius ``rho'`` centred at ``a`` and ``b``.  Each piece
    gets its own trapezoid rule; ``T(h)`` and ``T(h/2)`` are combined as
    ``(4 T(h/2) - T(h)) / 3`` and ``points`` doubles until the estimated
    relative error is below ``rtol``.

    Returns
    -------
    value, error_estimate : float
    """
    a, b = map(float, interval)
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    if rho_prime <= 0:
        raise ValueError("contour distance must be positive")
    rho = f.analyticity_distance((a, b))
    if rho_prime >= rho:
        raise SingularityTooClose(
            f"contour distance {rho_prime:g} >= analyticity distance {rho:g}")
    n = max(2048, int(points))
    level = 0
    coarse = _stadium_trapezoid(f, a, b, rho_prime, n, level)
    while True:
        level += 1
        fine = _stadium_trapezoid(f, a, b, rho_prime, n, level)
        value = (4.0 * fine - coarse) / 3.0
        err = abs(value - fine)
        if err <= rtol * abs(value) or (n << level) >= max_points:
            return value, err
        coarse = fine


def contour_integral_bound(f: AnalyticFunction, interval, rho_prime: float,
                           points: int = 2048) -> float:
    """``oint |f(z)| |dz|`` over the stadium at distance ``rho_prime`` around the interval."""
    return contour_integral_estimate(f, interval, rho_prime, points)[0]
