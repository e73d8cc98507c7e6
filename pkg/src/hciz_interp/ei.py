"""Expected-improvement minimization with the Gaussian covariance.

The prior is a zero-mean Gaussian process with covariance
``G(x - y) = exp(-(x - y)^2 / 2)``.  Conditioning on ``n`` exact
observations gives the posterior mean ``m_n`` (which coincides with the
Gaussian-RBF interpolant of the data) and variance ``sigma_n^2``.  Each
step maximizes the expected improvement over the current best value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfcx, ndtr

from .exceptions import IllConditioned, SingularMatrix
from .functions import AnalyticFunction
from .interp import NodeSet, evaluate, fit_gaussian, gaussian_kernel
from .numerics.dd import ExtendedReal
from .numerics.linalg import LUDecomposition, residual_norm
from .numerics.sampling import RngStream

log = logging.getLogger(__name__)

DEFAULT_GRID = 4096
REFINE_TOL = 1e-10
DEGENERATE_TOL = 1e-9
FSTAR_GRID = 100_000
FSTAR_TOL = 1e-12
LEMMA_TOL = 1e-9
IDENTITY_TOL = 1e-8
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class GpPosterior:
    """Posterior of the Gaussian-covariance process given exact observations.

    The kernel matrix is factored once in double-double; means and
    variances use ``w = K^{-1} k(x)`` so that ``m = w^T y`` and
    ``sigma^2 = 1 - w^T k(x)``.  Variances are clamped to ``[0, 1]``;
    ``clamp_count`` and ``min_raw_variance`` record clamping events.
    """

    def __init__(self, nodes: NodeSet, values):
        self.nodes = nodes if isinstance(nodes, NodeSet) else NodeSet(nodes)
        self.values = np.asarray(values, dtype=float)
        x = self.nodes.nodes
        if self.values.shape != x.shape:
            raise ValueError("one value per node required")
        k = gaussian_kernel(x, x)
        try:
            self._lu = LUDecomposition(k, "extended")
            check = self._lu.solve(ExtendedReal(self.values))
        except SingularMatrix as exc:
            raise IllConditioned(f"kernel matrix: {exc}", residual=math.inf) from exc
        self.residual = residual_norm(k, check, ExtendedReal(self.values))
        if self.residual > 1e-10 * max(1.0, float(np.max(np.abs(self.values)))):
            raise IllConditioned(f"kernel solve residual {self.residual:.3e}",
                                 residual=self.residual)
        self.clamp_count = 0
        self.min_raw_variance = math.inf

    def __len__(self):
        return self.nodes.nodes.size

    def mean_variance(self, x, raw: bool = False):
        """Posterior mean and (clamped unless ``raw``) variance at points ``x``."""
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        kx = gaussian_kernel(self.nodes.nodes, xs)  # (n, m)
        w = self._lu.solve(kx)
        mean = (w * self.values[:, None]).sum(axis=0).to_float()
        var = (1.0 - (w * kx).sum(axis=0)).to_float()
        if not raw:
            low, high = var < 0.0, var > 1.0
            if np.any(low | high):
                self.clamp_count += int(np.count_nonzero(low | high))
                self.min_raw_variance = min(self.min_raw_variance, float(var.min()))
                log.debug("clamped %d posterior variances (min %.3e)",
                          int(np.count_nonzero(low | high)), var.min())
                var = np.clip(var, 0.0, 1.0)
        if scalar:
            return float(mean[0]), float(var[0])
        return mean, var

    def mean(self, x):
        return self.mean_variance(x)[0]

    def variance(self, x):
        return self.mean_variance(x)[1]


def posterior(nodes, values, x):
    """``(m_n(x), sigma_n^2(x))`` for exact observations ``values`` at ``nodes``."""
    return GpPosterior(nodes, values).mean_variance(x)


def _h(z: np.ndarray) -> np.ndarray:
    # z Phi(z) + phi(z); erfcx form for z < 0 avoids the cancellation
    out = np.empty_like(z)
    pos = z >= 0
    zp = z[pos]
    out[pos] = zp * ndtr(zp) + np.exp(-0.5 * zp * zp - _LOG_SQRT_2PI)
    zn = z[~pos]
    with np.errstate(over="ignore"):
        out[~pos] = np.exp(-0.5 * zn * zn - _LOG_SQRT_2PI) * (
            1.0 + zn * math.sqrt(math.pi / 2) * erfcx(-zn / math.sqrt(2.0)))
    return out


def _log_h(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= -1.0
    out[pos] = np.log(_h(z[pos]))
    zn = z[~pos]
    tail = 1.0 + zn * math.sqrt(math.pi / 2) * erfcx(-zn / math.sqrt(2.0))
    with np.errstate(divide="ignore"):
        out[~pos] = -0.5 * zn * zn - _LOG_SQRT_2PI + np.log(np.maximum(tail, 0.0))
    return out


def expected_improvement(mean, variance, f_star):
    """``E[f* - min(f*, xi)]`` for ``xi ~ N(mean, variance)``.

    Equals ``(f* - m) Phi(z) + sigma phi(z)`` with ``z = (f* - m) / sigma``;
    for ``sigma = 0`` it is ``max(f* - m, 0)``.
    """
    scalar = np.ndim(mean) == 0 and np.ndim(variance) == 0
    m, v = np.broadcast_arrays(np.atleast_1d(np.asarray(mean, float)),
                               np.atleast_1d(np.asarray(variance, float)))
    if np.any(v < 0):
        raise ValueError("variance must be non-negative")
    s = np.sqrt(v)
    gain = f_star - m
    out = np.maximum(gain, 0.0)
    pos = s > 0
    out[pos] = s[pos] * _h(gain[pos] / s[pos])
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def log_expected_improvement(mean, variance, f_star) -> np.ndarray:
    """``log EI`` computed without underflow (``-inf`` where EI is exactly 0)."""
    m, v = np.broadcast_arrays(np.atleast_1d(np.asarray(mean, float)),
                               np.atleast_1d(np.asarray(variance, float)))
    s = np.sqrt(np.maximum(v, 0.0))
    gain = f_star - m
    out = np.full(m.shape, -np.inf)
    zero = s == 0
    with np.errstate(divide="ignore"):
        out[zero] = np.log(np.maximum(gain[zero], 0.0))
    pos = ~zero
    out[pos] = np.log(s[pos]) + _log_h(gain[pos] / s[pos])
    return out


def _acq(post: GpPosterior, f_star: float):
    def score(x):
        m, v = post.mean_variance(x)
        return log_expected_improvement(m, v, f_star)
    return score


def golden_section_max(g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                       tol: float = REFINE_TOL) -> tuple[float, float]:
    """Maximize a unimodal ``g`` on ``[lo, hi]`` to bracket width ``tol``."""
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    gc, gd = g(np.array([c]))[0], g(np.array([d]))[0]
    while hi - lo > tol:
        if gc >= gd:
            hi, d, gd = d, c, gc
            c = hi - _INV_PHI * (hi - lo)
            gc = g(np.array([c]))[0]
        else:
            lo, c, gc = c, d, gd
            d = lo + _INV_PHI * (hi - lo)
            gd = g(np.array([d]))[0]
    x = 0.5 * (lo + hi)
    return x, g(np.array([x]))[0]


def _grid_argmax(values: np.ndarray, rtol: float = 1e-12) -> int:
    best = np.max(values)
    if not np.isfinite(best):
        return 0
    slack = rtol * max(1.0, abs(best))
    return int(np.flatnonzero(values >= best - slack)[0])


def argmax_acquisition(post: GpPosterior, f_star: float, interval,
                       grid_size: int = DEFAULT_GRID) -> float:
    """Grid scan of EI plus golden-section refinement in the best cell.

    Ties go to the smallest ``x``; the refined point replaces the grid
    point only if it strictly improves EI.
    """
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    a, b = map(float, interval)
    grid = np.linspace(a, b, grid_size)
    score = _acq(post, f_star)
    vals = score(grid)
    i = _grid_argmax(vals)
    if not np.isfinite(vals[i]):
        return float(grid[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
    x, val = golden_section_max(score, lo, hi)
    return float(x) if val > vals[i] else float(grid[i])


def minimize_on_interval(f: AnalyticFunction, interval, grid_size: int = FSTAR_GRID,
                         tol: float = REFINE_TOL) -> tuple[float, float]:
    """Global minimum of ``f`` by dense grid plus golden-section refinement."""
    a, b = map(float, interval)
    grid = np.linspace(a, b, grid_size)
    vals = f.eval(grid)
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
    x, neg = golden_section_max(lambda q: -f.eval(q), lo, hi, tol)
    if -neg < vals[i]:
        return float(x), float(-neg)
    return float(grid[i]), float(vals[i])


def lemma_ei_bound_check(post: GpPosterior, f_star: float, grid,
                         strict: bool = True) -> float:
    """``max(|EI - (f* - min(f*, m))| - sigma)`` over ``grid``.

    Raises ``AssertionError`` (when ``strict``) if the maximum exceeds 1e-9.
    """
    m, v = post.mean_variance(np.asarray(grid, dtype=float))
    ei = expected_improvement(m, v, f_star)
    lhs = np.abs(ei - (f_star - np.minimum(f_star, m)))
    worst = float(np.max(lhs - np.sqrt(v)))
    if strict:
        assert worst <= LEMMA_TOL, f"EI bound violated by {worst:.3e}"
    return worst


def mean_identity_error(post: GpPosterior, grid) -> float:
    """Sup distance between the posterior mean and the Gaussian-RBF interpolant."""
    grid = np.asarray(grid, dtype=float)
    interp = fit_gaussian(post.nodes, post.values)
    return float(np.max(np.abs(post.mean(grid) - evaluate(interp, grid))))


@dataclass
class EiRecord:
    n: int
    x_next: float
    f_next: float
    f_best: float
    gap: float
    max_sigma: float
    max_ei: float
    lemma_violation: float
    identity_error: float

    @property
    def max_variance(self) -> float:
        return self.max_sigma ** 2


CSV_FIELDS = ("n", "x_next", "f_next", "f_best", "gap", "max_sigma", "max_ei")


@dataclass
class EiTrace:
    """Per-iteration EI records; row ``n`` uses the first ``n`` evaluations."""

    function: str
    interval: tuple[float, float]
    x1: float
    f_star: float
    x_star: float
    f_star_tol: float = FSTAR_TOL
    records: list[EiRecord] = field(default_factory=list)
    nodes: list[float] = field(default_factory=list)
    status: str = "ok"
    clamp_count: int = 0

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.records])

    @property
    def final_gap(self) -> float:
        return self.records[-1].gap if self.records else math.nan

    def gap_ratio(self, threshold: float = 1e-1) -> float:
        """Mean per-step contraction of the gap after it first drops below ``threshold``.

        ``(g_N / g_m)^(1 / (N - m))`` with ``m`` the first row below the
        threshold.  Gaps are floored at the ``f*`` tolerance, below which
        they cannot be told apart from 0, so the value is an upper bound.
        """
        gaps = np.maximum(self.gaps, self.f_star_tol)
        below = np.flatnonzero(gaps < threshold)
        if below.size == 0 or below[0] == gaps.size - 1:
            return math.nan
        m = int(below[0])
        steps = gaps.size - 1 - m
        return float((gaps[-1] / gaps[m]) ** (1.0 / steps))

    def gaps_non_increasing(self) -> bool:
        g = self.gaps
        return bool(np.all(np.diff(g) <= 0))

    def max_lemma_violation(self) -> float:
        return max((r.lemma_violation for r in self.records), default=-math.inf)

    def max_identity_error(self) -> float:
        return max((r.identity_error for r in self.records), default=0.0)

    def rows(self) -> list[tuple]:
        return [tuple(getattr(r, k) for k in CSV_FIELDS) for r in self.records]

    def summary(self) -> dict:
        decay = variance_decay_report([r.max_variance for r in self.records])
        return {
            "function": self.function,
            "interval": list(self.interval),
            "x1": self.x1,
            "f_star": self.f_star,
            "x_star": self.x_star,
            "f_star_tol": self.f_star_tol,
            "iterations": len(self.records),
            "final_gap": self.final_gap,
            "fitted_ratio": self.gap_ratio(),
            "gaps_non_increasing": self.gaps_non_increasing(),
            "lemma_max_violation": self.max_lemma_violation(),
            "mean_identity_max_error": self.max_identity_error(),
            "clamp_count": self.clamp_count,
            "variance_ratios": decay.ratios,
            "variance_ratios_decreasing": decay.decreasing_tail(),
            "status": self.status,
        }


@dataclass
class VarianceDecay:
    """``max sigma_n^2`` for ``n = 0..N`` (``n = 0`` is the prior, 1)."""

    max_variance: list[float]

    @property
    def ratios(self) -> list[float]:
        v = self.max_variance
        return [b / a if a > 0 else math.nan for a, b in zip(v, v[1:])]

    def decreasing_tail(self, window: int = 5) -> bool:
        """Successive ratios strictly decrease over the final ``window`` iterations."""
        r = self.ratios[-window:]
        return len(r) == window and all(y < x for x, y in zip(r, r[1:]))

    def rows(self):
        return list(enumerate(self.max_variance))


def variance_decay_report(max_variances: Sequence[float]) -> VarianceDecay:
    """Build the decay table from per-iteration maxima (prior row prepended)."""
    return VarianceDecay([1.0] + [float(v) for v in max_variances])


def run_ei(f: AnalyticFunction, interval=(-1.0, 1.0), iterations: int = 15,
           x1: float | None = None, grid_size: int = DEFAULT_GRID,
           rng: RngStream | None = None, check_points: int = 256) -> EiTrace:
    """Run ``iterations`` evaluations of expected-improvement minimization.

    Parameters
    ----------
    f : AnalyticFunction
        Objective, real-valued on the interval.
    x1 : float, optional
        First evaluation point; the midpoint by default.
    rng : RngStream, optional
        Draws ``check_points`` extra uniform points per iteration on which
        the EI bound is checked in addition to the grid.

    Returns
    -------
    EiTrace
        ``status`` is ``'ok'``, ``'degenerate-proposal'`` (the argmax hit an
        existing node) or ``'ill-conditioned'``; in the last case the trace
        holds every completed row and the error is re-raised with it attached
        as ``partial``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    a, b = map(float, interval)
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    x1 = 0.5 * (a + b) if x1 is None else float(x1)
    if not a <= x1 <= b:
        raise ValueError("x1 must lie in the interval")
    x_star, f_star = minimize_on_interval(f, (a, b))
    trace = EiTrace(f.id, (a, b), x1, f_star, x_star)
    rng = rng if rng is not None else RngStream(0)
    grid = np.linspace(a, b, grid_size)
    xs = [x1]
    ys = [float(f.eval(x1))]
    for n in range(1, iterations + 1):
        try:
            post = GpPosterior(NodeSet(np.array(xs), (a, b)), np.array(ys))
            f_best = min(ys)
            m, v = post.mean_variance(grid)
            ei = expected_improvement(m, v, f_best)
            extra = rng.generator(n).uniform(a, b, check_points)
            lemma = lemma_ei_bound_check(post, f_best, np.concatenate((grid, extra)),
                                         strict=False)
            ident = mean_identity_error(post, grid)
            x_next = f_next = math.nan
            if n < iterations:
                x_next = argmax_acquisition(post, f_best, (a, b), grid_size)
                f_next = float(f.eval(x_next))
        except IllConditioned as exc:
            trace.status = "ill-conditioned"
            exc.partial = trace
            raise
        trace.clamp_count += post.clamp_count
        trace.records.append(EiRecord(n, x_next, f_next, f_best, f_best - f_star,
                                      float(np.sqrt(v.max())), float(ei.max()), lemma, ident))
        if n == iterations:
            break
        if np.min(np.abs(np.array(xs) - x_next)) <= DEGENERATE_TOL:
            trace.status = "degenerate-proposal"
            break
        xs.append(x_next)
        ys.append(f_next)
    trace.nodes = xs
    return trace
