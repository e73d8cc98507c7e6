"""Polynomial, exponential and Gaussian-RBF interpolation on arbitrary nodes.

All kernel and exponential systems are assembled and solved in
double-double precision; there is no regularization, so a fit either
reproduces its data to the residual tolerance or raises
:class:`~hciz_interp.exceptions.IllConditioned`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    DuplicateFrequencies,
    DuplicateNodes,
    IllConditioned,
    SingularMatrix,
)
from .functions import AnalyticFunction
from .numerics.dd import ExtendedReal, as_extended, exp as dd_exp
from .numerics.linalg import LUDecomposition, residual_norm
from .numerics.sampling import RngStream

log = logging.getLogger(__name__)

MIN_GAP = 1e-12
RESIDUAL_TOL = 1e-10
DEFAULT_GRID = 2001
STRATEGIES = ("equispaced", "random-uniform", "chebyshev", "left-half")
BASES = ("polynomial", "exponential", "gaussian")


def _min_gap(values: np.ndarray) -> float:
    if values.size < 2:
        return math.inf
    return float(np.min(np.diff(np.sort(values))))


@dataclass(frozen=True)
class NodeSet:
    """Distinct interpolation nodes inside an interval ``[a, b]``.

    When ``interval`` is omitted it defaults to the hull of the nodes
    (widened by one unit on each side for a single node).
    """

    nodes: np.ndarray
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        if x.ndim != 1 or x.size == 0:
            raise ValueError("nodes must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(x)):
            raise ValueError("nodes must be finite")
        if _min_gap(x) <= MIN_GAP:
            raise DuplicateNodes(f"nodes are not pairwise distinct (min gap {_min_gap(x):.3e})")
        if self.interval is None:
            lo, hi = float(x.min()), float(x.max())
            interval = (lo - 1.0, hi + 1.0) if lo == hi else (lo, hi)
        else:
            interval = (float(self.interval[0]), float(self.interval[1]))
        a, b = interval
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got {interval}")
        if np.any(x < a) or np.any(x > b):
            raise ValueError(f"nodes must lie in [{a}, {b}]")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "interval", interval)

    def __len__(self):
        return self.nodes.size

    @classmethod
    def from_strategy(cls, strategy: str, n: int, interval=(-1.0, 1.0),
                      rng: RngStream | None = None) -> "NodeSet":
        """Generate ``n`` nodes by a named placement strategy.

        ``left-half`` places equispaced nodes in ``[a, (a+b)/2]`` while the
        node set keeps the full interval, so errors are measured on all of
        ``[a, b]``.  ``random-uniform`` draws from substream ``n`` of ``rng``.
        """
        a, b = map(float, interval)
        if n < 1:
            raise ValueError("n must be >= 1")
        if strategy == "equispaced":
            x = np.linspace(a, b, n) if n > 1 else np.array([0.5 * (a + b)])
        elif strategy == "chebyshev":
            k = np.arange(n)
            x = 0.5 * (a + b) - 0.5 * (b - a) * np.cos((2 * k + 1) * np.pi / (2 * n))
        elif strategy == "random-uniform":
            if rng is None:
                raise ValueError("random-uniform nodes need an RngStream")
            x = np.sort(rng.generator(n).uniform(a, b, n))
        elif strategy == "left-half":
            mid = 0.5 * (a + b)
            x = np.linspace(a, mid, n) if n > 1 else np.array([a])
        else:
            raise ValueError(f"unknown node strategy {strategy!r}; choose from {STRATEGIES}")
        return cls(x, (a, b))


@dataclass(frozen=True)
class FrequencySet:
    """Distinct exponents ``t_k`` with a strict bound ``|t_k| < R``."""

    freqs: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        if _min_gap(t) <= 0.0:
            raise DuplicateFrequencies("frequencies are not pairwise distinct")
        r = float(np.nextafter(np.max(np.abs(t)), np.inf)) if self.bound is None else float(self.bound)
        if np.any(np.abs(t) >= r):
            raise ValueError(f"all |t_k| must be below R = {r}")
        object.__setattr__(self, "freqs", t)
        object.__setattr__(self, "bound", r)

    def __len__(self):
        return self.freqs.size


@dataclass
class Interpolant:
    """A fitted interpolant ``sum_k c_k f_k``.

    ``coefficients`` are double-double; for the polynomial basis they are
    monomial coefficients (``c_k`` multiplies ``x**(k-1)``) while evaluation
    uses the Newton form kept in ``newton``.
    """

    basis: str
    coefficients: ExtendedReal
    nodes: NodeSet
    freqs: FrequencySet | None = None
    residual: float = 0.0
    newton: ExtendedReal | None = field(default=None, repr=False)

    def basis_matrix(self, x) -> ExtendedReal:
        """Basis functions at points ``x``; shape ``(len(x), n)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.basis == "gaussian":
            return gaussian_kernel(x, self.nodes.nodes)
        if self.basis == "exponential":
            return exponential_matrix(x, self.freqs.freqs)
        raise ValueError("polynomial interpolants are evaluated in Newton form")

    def evaluate_extended(self, x) -> ExtendedReal:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.basis == "polynomial":
            return _newton_eval(self.newton, self.nodes.nodes, x)
        k = self.basis_matrix(x)
        c = self.coefficients
        acc = ExtendedReal.zeros(x.shape)
        for j in range(c.shape[0]):
            acc = acc + k[:, j] * c[j]
        return acc

    def __call__(self, x):
        return evaluate(self, x)


def gaussian_kernel(x, centers) -> ExtendedReal:
    """``exp(-(x_i - c_j)^2 / 2)`` in double-double, shape ``(len(x), len(c))``."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(centers, dtype=float)
    d = ExtendedReal.from_difference(x[:, None], c[None, :])
    return dd_exp((d * d).scale(-1) * -1.0)


def exponential_matrix(x, freqs) -> ExtendedReal:
    """``exp(t_k x_m)`` in double-double; rows are points, columns frequencies."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(freqs, dtype=float)
    return dd_exp(ExtendedReal.from_product(x[:, None], t[None, :]))


def _values(values, n: int) -> ExtendedReal:
    v = as_extended(values) if isinstance(values, ExtendedReal) else ExtendedReal(
        np.asarray(values, dtype=float))
    if v.shape != (n,):
        raise ValueError(f"expected {n} values, got shape {v.shape}")
    return v


def _check_residual(residual: float, values: ExtendedReal, what: str):
    scale = max(1.0, float(np.max(np.abs(values.to_float()))))
    if not np.isfinite(residual) or residual > RESIDUAL_TOL * scale:
        raise IllConditioned(f"{what}: node residual {residual:.3e} exceeds tolerance",
                             residual=residual)


def _solve(matrix: ExtendedReal, values: ExtendedReal, what: str):
    try:
        lu = LUDecomposition(matrix, "extended")
        coeffs = lu.solve(values)
    except SingularMatrix as exc:
        raise IllConditioned(f"{what}: {exc}", residual=math.inf) from exc
    residual = residual_norm(matrix, coeffs, values)
    _check_residual(residual, values, what)
    return coeffs, residual


def _newton_eval(dd_coeffs: ExtendedReal, nodes: np.ndarray, x: np.ndarray) -> ExtendedReal:
    n = nodes.size
    acc = ExtendedReal(np.full(x.shape, dd_coeffs.hi[n - 1]), np.full(x.shape, dd_coeffs.lo[n - 1]))
    for k in range(n - 2, -1, -1):
        acc = acc * ExtendedReal.from_difference(x, nodes[k]) + dd_coeffs[k]
    return acc


def fit_polynomial(nodes: NodeSet, values) -> Interpolant:
    """Polynomial interpolant via Newton divided differences (double-double)."""
    x = nodes.nodes
    n = x.size
    d = _values(values, n).copy()
    for j in range(1, n):
        num = d[j:] - d[j - 1:n - 1]
        den = ExtendedReal.from_difference(x[j:], x[:n - j])
        d[j:] = num / den
    # Newton form -> monomial coefficients, ascending powers
    mono = ExtendedReal.zeros(n)
    mono[0] = d[n - 1]
    for k in range(n - 2, -1, -1):
        shifted = ExtendedReal.zeros(n)
        shifted[1:] = mono[:n - 1]
        mono = shifted - mono * float(x[k])
        mono[0] = mono[0] + d[k]
    out = Interpolant("polynomial", mono, nodes, newton=d)
    vals = _values(values, n)
    out.residual = float(np.max(np.abs((out.evaluate_extended(x) - vals).to_float())))
    return out


def fit_exponential(nodes: NodeSet, freqs: FrequencySet, values) -> Interpolant:
    """Interpolant in ``span{exp(t_k x)}`` solved in double-double.

    Raises
    ------
    IllConditioned
        When the node residual exceeds ``1e-10`` (scaled by ``max|values|``
        above 1) even in extended precision.
    """
    n = len(nodes)
    if len(freqs) != n:
        raise ValueError(f"{n} nodes but {len(freqs)} frequencies")
    v = _values(values, n)
    a = exponential_matrix(nodes.nodes, freqs.freqs)
    c, residual = _solve(a, v, "exponential fit")
    return Interpolant("exponential", c, nodes, freqs, residual)


def fit_gaussian(nodes: NodeSet, values, route: str = "direct") -> Interpolant:
    """Gaussian-RBF interpolant with unit shape ``exp(-(x - x_k)^2 / 2)``.

    ``route='direct'`` solves the kernel system.  ``route='via_exponential'``
    fits exponentials with ``t_k = x_k`` to ``exp(x_l^2 / 2) * values`` and
    converts back with ``c_k = d_k exp(x_k^2 / 2)``, using
    ``exp(-(x - x_k)^2/2) = exp(-x^2/2) exp(x_k x) exp(-x_k^2/2)``.
    """
    x = nodes.nodes
    n = x.size
    v = _values(values, n)
    if route == "direct":
        k = gaussian_kernel(x, x)
        c, residual = _solve(k, v, "gaussian fit")
        return Interpolant("gaussian", c, nodes, residual=residual)
    if route != "via_exponential":
        raise ValueError(f"unknown route {route!r}")
    half_sq = ExtendedReal.from_product(x, x).scale(-1)
    weight = dd_exp(half_sq)
    inner = fit_exponential(nodes, FrequencySet(x), v * weight)
    c = inner.coefficients * weight
    out = Interpolant("gaussian", c, nodes)
    out.residual = float(np.max(np.abs((out.evaluate_extended(x) - v).to_float())))
    return out


def fit(basis: str, nodes: NodeSet, values, freqs: FrequencySet | None = None) -> Interpolant:
    if basis == "polynomial":
        return fit_polynomial(nodes, values)
    if basis == "exponential":
        return fit_exponential(nodes, freqs if freqs is not None else FrequencySet(nodes.nodes), values)
    if basis == "gaussian":
        return fit_gaussian(nodes, values)
    raise ValueError(f"unknown basis {basis!r}; choose from {BASES}")


def evaluate(interp: Interpolant, x):
    """Evaluate in extended precision and round to float64.

    Points outside the node interval are allowed (logged as extrapolation).
    """
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    a, b = interp.nodes.interval
    if np.any((xs < a) | (xs > b)):
        log.debug("extrapolating %s interpolant outside [%g, %g]", interp.basis, a, b)
    out = interp.evaluate_extended(xs).to_float()
    return float(out[0]) if scalar else out


def sup_error(f: AnalyticFunction, interp: Interpolant, grid_size: int = DEFAULT_GRID) -> float:
    """``max |f - interp|`` over an equispaced grid on the node interval."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    a, b = interp.nodes.interval
    grid = np.linspace(a, b, grid_size)
    return float(np.max(np.abs(f.eval(grid) - evaluate(interp, grid))))


def fitted_ratio(ns: Sequence[int], errors: Sequence[float]) -> float:
    """Geometric ratio ``exp(slope)`` of a least-squares line through ``log e_n``."""
    ns = np.asarray(ns, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > 0
    if keep.sum() < 2:
        return math.nan
    slope = np.polyfit(ns[keep], np.log(e[keep]), 1)[0]
    return float(math.exp(slope))


@dataclass
class ConvergenceReport:
    function: str
    basis: str
    strategy: str
    interval: tuple[float, float]
    ns: list[int] = field(default_factory=list)
    sup_errors: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    fitted_ratio: float = math.nan
    theory_ratio: float = math.nan
    tail_window: tuple[int, int] | None = None

    def rows(self):
        """``(n, sup_error, residual, ratio_estimate)`` with successive-error ratios."""
        out = []
        for i, (n, e, r) in enumerate(zip(self.ns, self.sup_errors, self.residuals)):
            prev = self.sup_errors[i - 1] if i else math.nan
            ratio = e / prev if i and prev > 0 else math.nan
            out.append((n, e, r, ratio))
        return out

    def summary(self) -> dict:
        return {
            "function": self.function,
            "basis": self.basis,
            "strategy": self.strategy,
            "interval": list(self.interval),
            "n_max": self.ns[-1] if self.ns else None,
            "final_sup_error": self.sup_errors[-1] if self.sup_errors else None,
            "fitted_ratio": self.fitted_ratio,
            "theory_ratio": self.theory_ratio,
            "tail_window": list(self.tail_window) if self.tail_window else None,
        }


def run_convergence(f: AnalyticFunction, basis: str, node_strategy: str = "equispaced",
                    n_range: Sequence[int] = range(2, 21), interval=(-1.0, 1.0),
                    grid_size: int = DEFAULT_GRID, rng: RngStream | None = None,
                    freq_rule=None, tail_fraction: float = 0.5) -> ConvergenceReport:
    """Sup-error table over ``n_range`` plus a fitted geometric tail ratio.

    ``freq_rule(nodes) -> FrequencySet`` chooses exponents for the
    exponential basis (default ``t_k = x_k``).  The tail ratio is fitted
    over the last ``tail_fraction`` of the n values.

    Raises
    ------
    IllConditioned
        With ``partial`` set to the report so far and ``last_good`` the
        largest n fitted.
    """
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}; choose from {BASES}")
    a, b = map(float, interval)
    rho = f.analyticity_distance((a, b))
    if not rho > 0:
        raise ValueError("function must be analytic on the interval")
    if node_strategy == "random-uniform" and rng is None:
        rng = RngStream(0)
    report = ConvergenceReport(f.id, basis, node_strategy, (a, b),
                               theory_ratio=(b - a) / rho)
    ns = list(n_range)
    for n in ns:
        nodes = NodeSet.from_strategy(node_strategy, n, (a, b), rng)
        values = f.eval_extended(nodes.nodes)
        freqs = None
        if basis == "exponential":
            freqs = freq_rule(nodes) if freq_rule is not None else FrequencySet(nodes.nodes)
        try:
            interp = fit(basis, nodes, values, freqs)
        except IllConditioned as exc:
            _finish_ratio(report, tail_fraction)
            exc.partial = report
            exc.last_good = report.ns[-1] if report.ns else None
            raise
        report.ns.append(n)
        report.sup_errors.append(sup_error(f, interp, grid_size))
        report.residuals.append(interp.residual)
    _finish_ratio(report, tail_fraction)
    return report


def _finish_ratio(report: ConvergenceReport, tail_fraction: float):
    m = len(report.ns)
    if m < 2:
        return
    start = min(m - 2, int(math.floor(m * (1.0 - tail_fraction))))
    report.tail_window = (report.ns[start], report.ns[-1])
    report.fitted_ratio = fitted_ratio(report.ns[start:], report.sup_errors[start:])
