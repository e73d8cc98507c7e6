"""Monte Carlo evaluation of the HCIZ-based interpolation error formulas.

The exponential-interpolation error at a point ``x0`` is an average over a
point ``v`` on the unit sphere of C^(n+1) and a Haar unitary ``U`` in U(n)
of ``exp(tr(T U^H P_v^H X~ P_v U))`` times ``prod_k (d/dq - t_k) f`` at the
Rayleigh quotient ``q = v^H X~ v``, scaled by ``prod_k (x0 - x_k) / (n! Z)``
where ``Z`` is the unitary-group integral of ``exp(tr(T U^H X U))``.  Here
``X~ = diag(x0, x_1, ..., x_n)``.

The Gaussian-RBF error follows by conjugating with ``exp(+-x^2/2)``, and
polynomial interpolation error is the simplex average of ``f^(n)``.
Direct-solve errors are provided as oracles for every estimator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .exceptions import BoundViolation, DuplicateEntries, IllConditioned
from .functions import AnalyticFunction, contour_integral_bound, modulate_gaussian
from .interp import (
    FrequencySet,
    NodeSet,
    evaluate,
    exponential_matrix,
    fit_exponential,
    fit_gaussian,
    fit_polynomial,
)
from .numerics.dd import ExtendedReal
from .numerics.linalg import LUDecomposition, eig_hermitian, vandermonde_product
from .numerics.montecarlo import DEFAULT_BLOCK, run_blocks
from .numerics.sampling import (
    RngStream,
    householder_complement,
    sample_haar_unitary,
    sample_simplex,
    sample_unit_sphere_complex,
)

LOG_SPACE_ABOVE = 15


@dataclass(frozen=True)
class HcizProblem:
    """Diagonal data ``X = diag(x)``, ``T = diag(t)`` and an optional extension point."""

    x: np.ndarray
    t: np.ndarray
    x0: float | None = None
    t0: float | None = None

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if x.shape != t.shape or x.ndim != 1:
            raise ValueError("x and t must be 1-D and of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def x_tilde(self) -> np.ndarray:
        if self.x0 is None:
            raise ValueError("problem has no extension point x0")
        return np.concatenate(([float(self.x0)], self.x))

    def hull(self) -> tuple[float, float]:
        pts = self.x_tilde if self.x0 is not None else self.x
        return float(pts.min()), float(pts.max())


@dataclass
class HcizEstimate:
    mean: float
    std_error: float
    samples: int
    oracle: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def z_score(self, reference: float | None = None, atol: float = 0.0) -> float:
        """``|mean - reference| / std_error``.

        ``atol`` absorbs deterministic roundoff in integrands that vanish
        identically; a zero-variance estimate scores 0 when it matches the
        reference to 1e-12 relative.
        """
        ref = self.oracle if reference is None else reference
        diff = max(0.0, abs(self.mean - ref) - atol)
        if self.std_error == 0.0:
            return 0.0 if diff <= 1e-12 * max(1.0, abs(ref)) else math.inf
        return diff / self.std_error


@dataclass(frozen=True)
class DifferentialOperator:
    """``prod_k (d/dq - t_k) = sum_s a_s d^s/dq^s``; repeated ``t`` allowed."""

    t: np.ndarray
    coefficients: np.ndarray = field(init=False)

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "coefficients", P.polyfromroots(t) if t.size else np.ones(1))

    @property
    def order(self) -> int:
        return self.t.size


def apply_operator(op: DifferentialOperator, f: AnalyticFunction, q):
    """``sum_s a_s f^(s)(q)``."""
    jet = f.eval_jet(q, op.order)
    out = 0.0
    for s, a in enumerate(op.coefficients):
        out = out + a * jet[s]
    return out


def _require_distinct(values, what):
    v = np.sort(np.asarray(values, dtype=float))
    if v.size > 1 and np.any(np.diff(v) == 0):
        raise DuplicateEntries(f"{what} entries must be pairwise distinct")


def _log_beta(n: int) -> float:
    return sum(math.lgamma(k + 1) for k in range(n))


DD_EPS = 2.0 ** -104


def hciz_z_determinant(p: HcizProblem, rtol: float = 1e-5) -> float:
    """Unitary-group integral from ``det(exp(t_k x_m)) * beta_n / (V(X) V(T))``.

    ``beta_n = prod_{k<n} k!``; above n = 15 the prefactor is combined in
    log space.  The determinant cancels heavily as ``n`` grows; its relative
    error is estimated as ``2^-104`` times the spread of the LU pivots and
    ``IllConditioned`` is raised when that estimate exceeds ``rtol``.
    """
    _require_distinct(p.x, "x")
    _require_distinct(p.t, "t")
    n = p.n
    lu = LUDecomposition(exponential_matrix(p.x, p.t), "extended")
    pivots = np.abs(np.diagonal(lu.lu.to_float()))
    est = DD_EPS * float(pivots.max() / pivots.min()) if pivots.min() > 0 else math.inf
    if lu.singular or est > rtol:
        raise IllConditioned(
            f"determinant route: estimated relative error {est:.1e} exceeds {rtol:g} at n={n}",
            residual=est)
    det = lu.determinant()
    vv = vandermonde_product(p.x) * vandermonde_product(p.t)
    if n > LOG_SPACE_ABOVE:
        r = float(det / vv)
        if not r > 0 or not math.isfinite(r):
            raise IllConditioned(f"determinant route gave a non-positive ratio at n={n}")
        return math.exp(_log_beta(n) + math.log(r))
    beta = ExtendedReal(1.0)
    for k in range(n):
        beta = beta * float(math.factorial(k))
    z = float(beta * det / vv)
    if not z > 0 or not math.isfinite(z):
        raise IllConditioned(f"determinant route gave non-positive Z = {z} at n={n}")
    return z


def hciz_integrand(x, t, u: np.ndarray) -> np.ndarray:
    """``exp(tr(T U^H X U)) = exp(sum_ij x_i t_j |U_ij|^2)`` for a stack of ``U``."""
    weights = np.abs(u) ** 2
    return np.exp(np.einsum("i,sij,j->s", np.asarray(x, float), weights, np.asarray(t, float)))


def hciz_z_montecarlo(p: HcizProblem, samples: int, rng: RngStream,
                      block: int = DEFAULT_BLOCK, workers: int | None = None) -> HcizEstimate:
    """Haar Monte Carlo estimate of the unitary-group integral.

    The determinant route fills ``oracle`` whenever ``x`` and ``t`` are
    distinct; for n = 1 the integrand does not depend on ``U`` and equals
    ``exp(t x)`` exactly.
    """
    if samples < 100:
        raise ValueError("at least 100 samples required")
    n = p.n
    if n == 1:
        value = math.exp(float(p.t[0]) * float(p.x[0]))

        def draw(gen, count):
            return np.full(count, value)
    else:
        def draw(gen, count):
            return hciz_integrand(p.x, p.t, sample_haar_unitary(n, gen, size=count))

    moments = run_blocks(draw, samples, rng, block, workers)
    try:
        oracle = hciz_z_determinant(p)
    except (DuplicateEntries, IllConditioned):
        oracle = None
    return HcizEstimate(moments.mean, moments.std_error, moments.count, oracle)


@dataclass
class ErrorMcSample:
    """Per-sample pieces of the error integrand (for diagnostics and tests).

    ``phi`` is ``prod_k (x0 - x_k) / n!`` times the operator value at ``q``;
    ``k`` is the undeformed kernel ``exp(tr(T U^H X U))``.
    """

    v: np.ndarray
    u: np.ndarray
    q: np.ndarray
    k_tilde: np.ndarray
    phi: np.ndarray
    k: np.ndarray
    operator_value: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.k_tilde * self.operator_value


def theorem1_samples(p: HcizProblem, f: AnalyticFunction, gen: np.random.Generator,
                     count: int) -> ErrorMcSample:
    """Draw ``count`` samples of ``(v, U)`` and evaluate the integrand pieces.

    ``P_v`` is the plain Householder complement; the U(n) average makes the
    result independent of that choice.
    """
    n = p.n
    xt = p.x_tilde
    v = sample_unit_sphere_complex(n + 1, gen, size=count)
    pv = householder_complement(v)
    m = np.einsum("sia,i,sib->sab", pv.conj(), xt, pv)
    u = sample_haar_unitary(n, gen, size=count)
    diag = np.einsum("saj,sab,sbj->sj", u.conj(), m, u).real
    k_tilde = np.exp(diag @ p.t)
    q = (np.abs(v) ** 2) @ xt
    op = apply_operator(DifferentialOperator(p.t), f, q)
    phi = float(np.prod(float(p.x0) - p.x)) / math.factorial(n) * op
    return ErrorMcSample(v, u, q, k_tilde, phi, hciz_integrand(p.x, p.t, u), op)


def _prefactor(p: HcizProblem, z: float) -> float:
    n = p.n
    num = float(np.prod(float(p.x0) - p.x))
    if n > LOG_SPACE_ABOVE:
        return math.copysign(math.exp(math.log(abs(num)) - math.lgamma(n + 1) - math.log(z)), num) \
            if num != 0 else 0.0
    return num / (math.factorial(n) * z)


def theorem1_error_mc(p: HcizProblem, f: AnalyticFunction, samples: int, rng: RngStream,
                      z_route: str = "determinant", block: int = DEFAULT_BLOCK,
                      workers: int | None = None) -> HcizEstimate:
    """Monte Carlo estimate of ``f(x0) - I^e f(x0)`` from the HCIZ error formula.

    Parameters
    ----------
    p : HcizProblem
        Nodes ``x``, frequencies ``t`` and the evaluation point ``x0``.
    z_route : {'determinant', 'montecarlo'}
        Source of the normalizing integral ``Z``.  The Monte Carlo route
        draws from a separate substream and adds its own variance.
    """
    if p.x0 is None:
        raise ValueError("theorem1_error_mc needs an evaluation point x0")
    if np.any(p.x == p.x0):
        raise ValueError("x0 must differ from every node")

    def draw(gen, count):
        return theorem1_samples(p, f, gen, count).values

    moments = run_blocks(draw, samples, rng, block, workers)
    if z_route == "determinant":
        z = hciz_z_determinant(p)
    elif z_route == "montecarlo":
        z = hciz_z_montecarlo(p, samples, RngStream(rng.seed, rng.stream + 0x5A5A5A),
                              block, workers).mean
    else:
        raise ValueError(f"unknown z_route {z_route!r}")
    pref = _prefactor(p, z)
    return HcizEstimate(pref * moments.mean, abs(pref) * moments.std_error, moments.count)


def corollary1_error_mc(nodes, f: AnalyticFunction, x0: float, samples: int, rng: RngStream,
                        block: int = DEFAULT_BLOCK, workers: int | None = None) -> HcizEstimate:
    """Monte Carlo estimate of the Gaussian-RBF error ``f(x0) - I^g f(x0)``.

    Runs :func:`theorem1_error_mc` with ``t_k = x_k`` on ``exp(q^2/2) f(q)``
    and multiplies by ``exp(-x0^2/2)``.
    """
    x = nodes.nodes if isinstance(nodes, NodeSet) else np.asarray(nodes, dtype=float)
    p = HcizProblem(x, x, x0=x0)
    est = theorem1_error_mc(p, modulate_gaussian(f, +1), samples, rng, block=block,
                            workers=workers)
    w = math.exp(-0.5 * x0 * x0)
    return HcizEstimate(w * est.mean, w * est.std_error, est.samples)


def hermite_genocchi_error_mc(nodes, f: AnalyticFunction, x0: float, samples: int,
                              rng: RngStream, block: int = DEFAULT_BLOCK,
                              workers: int | None = None) -> HcizEstimate:
    """Polynomial-interpolation error as a simplex average of ``f^(n)``.

    ``s_0`` weights ``x0`` and ``s_k`` weights node ``x_k``; the mean of
    ``f^(n)(sum_k s_k x_k)`` is scaled by ``prod_k (x0 - x_k) / n!``.
    """
    x = nodes.nodes if isinstance(nodes, NodeSet) else np.asarray(nodes, dtype=float)
    n = x.size
    pts = np.concatenate(([float(x0)], x))

    def draw(gen, count):
        s = sample_simplex(n, gen, size=count)
        return f.eval_jet(s @ pts, n)[n]

    moments = run_blocks(draw, samples, rng, block, workers)
    pref = float(np.prod(float(x0) - x)) / math.factorial(n)
    return HcizEstimate(pref * moments.mean, abs(pref) * moments.std_error, moments.count)


# -- direct-solve oracles ---------------------------------------------------

def _direct(interp, f: AnalyticFunction, x0: float) -> float:
    diff = f.eval_extended(np.array([x0])) - interp.evaluate_extended(np.array([x0]))
    return float(diff.to_float()[0])


def direct_error_exponential(p: HcizProblem, f: AnalyticFunction) -> float:
    nodes = NodeSet(p.x)
    interp = fit_exponential(nodes, FrequencySet(p.t), f.eval_extended(p.x))
    return _direct(interp, f, float(p.x0))


def direct_error_gaussian(nodes, f: AnalyticFunction, x0: float) -> float:
    nodes = nodes if isinstance(nodes, NodeSet) else NodeSet(nodes)
    interp = fit_gaussian(nodes, f.eval_extended(nodes.nodes))
    return _direct(interp, f, x0)


def direct_error_polynomial(nodes, f: AnalyticFunction, x0: float) -> float:
    nodes = nodes if isinstance(nodes, NodeSet) else NodeSet(nodes)
    interp = fit_polynomial(nodes, f.eval_extended(nodes.nodes))
    return _direct(interp, f, x0)


# -- flat limit ---------------------------------------------------------------

@dataclass
class FlatLimitTable:
    eps: list[float]
    sup_diff: list[float]

    @property
    def ratios(self) -> list[float]:
        return [a / b if b > 0 else math.inf for a, b in zip(self.sup_diff, self.sup_diff[1:])]

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.sup_diff, self.sup_diff[1:]))

    def first_order(self, low: float = 5.0, high: float = 20.0) -> bool:
        """Consecutive ratios in ``[low, high]`` (first order for a factor-10 schedule)."""
        return all(low <= r <= high for r in self.ratios)

    def rows(self):
        return list(zip(self.eps, self.sup_diff))


def flat_limit_check(nodes: NodeSet, f: AnalyticFunction,
                     eps_schedule: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
                     grid_size: int = 2001) -> FlatLimitTable:
    """``sup |I^e f - I^p f|`` for ``t_k = eps * k`` along a decreasing schedule."""
    eps = [float(e) for e in eps_schedule]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps schedule must be positive and strictly decreasing")
    values = f.eval_extended(nodes.nodes)
    poly = fit_polynomial(nodes, values)
    a, b = nodes.interval
    grid = np.linspace(a, b, grid_size)
    ref = evaluate(poly, grid)
    k = np.arange(1, len(nodes) + 1, dtype=float)
    diffs = []
    for e in eps:
        interp = fit_exponential(nodes, FrequencySet(e * k), values)
        diffs.append(float(np.max(np.abs(evaluate(interp, grid) - ref))))
    return FlatLimitTable(eps, diffs)


# -- structural bounds ----------------------------------------------------------

def ordered_complement(v: np.ndarray, x_tilde: np.ndarray) -> np.ndarray:
    """Complement isometry ``P`` diagonalizing ``P^H X~ P`` in node order.

    The k-th smallest eigenvalue of the compression is placed at the
    position of the k-th smallest node ``x_1..x_n`` (``x_tilde[1:]``).
    """
    xt = np.asarray(x_tilde, dtype=float)
    pv = householder_complement(v)
    m = pv.conj().T @ (xt[:, None] * pv)
    m = 0.5 * (m + m.conj().T)
    _, w = eig_hermitian(m)
    pw = pv @ w
    order = np.argsort(xt[1:], kind="stable")
    out = np.empty_like(pw)
    out[:, order] = pw
    return out


def compressed_diagonal(p_ordered: np.ndarray, x_tilde: np.ndarray) -> np.ndarray:
    """Diagonal of ``P^H X~ P`` (real)."""
    xt = np.asarray(x_tilde, dtype=float)
    return np.einsum("ia,i,ia->a", p_ordered.conj(), xt, p_ordered).real


def interlacing_sum_check(v, x_tilde, interval, strict: bool = True) -> float:
    """``sum_k |x~_k - x_k|`` for the ordered compression; bounded by ``b - a``."""
    xt = np.asarray(x_tilde, dtype=float)
    a, b = interval
    if np.any(xt < a) or np.any(xt > b):
        raise ValueError("all entries of X~ must lie in the interval")
    pv = ordered_complement(v, xt)
    total = float(np.sum(np.abs(compressed_diagonal(pv, xt) - xt[1:])))
    if strict and total > (b - a) + 1e-10:
        raise BoundViolation(f"interlacing sum {total} exceeds b - a = {b - a}", total, b - a)
    return total


def kernel_ratio_bound_check(v, u, x_tilde, t, interval, bound_r: float,
                             strict: bool = True) -> float:
    """``K~ / K`` with the ordered complement; must lie in ``[e^{R(a-b)}, e^{R(b-a)}]``."""
    xt = np.asarray(x_tilde, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) >= bound_r):
        raise ValueError("all |t_k| must be below R")
    a, b = interval
    pv = ordered_complement(v, xt)
    shift = compressed_diagonal(pv, xt) - xt[1:]
    log_ratio = float(np.einsum("i,ij,j->", shift, np.abs(u) ** 2, t))
    ratio = math.exp(log_ratio)
    lo = math.exp(bound_r * (a - b)) * (1 - 1e-9)
    hi = math.exp(bound_r * (b - a)) * (1 + 1e-9)
    if strict and not lo <= ratio <= hi:
        raise BoundViolation(f"kernel ratio {ratio} outside [{lo}, {hi}]", ratio, hi)
    return ratio


def phi_value(nodes, freqs, f: AnalyticFunction, x0: float, v) -> float:
    """``prod_k (x0 - x_k) / n! * [prod_k (d/dq - t_k)] f`` at ``q = v^H X~ v``."""
    x = nodes.nodes if isinstance(nodes, NodeSet) else np.asarray(nodes, dtype=float)
    t = freqs.freqs if isinstance(freqs, FrequencySet) else np.asarray(freqs, dtype=float)
    xt = np.concatenate(([float(x0)], x))
    q = float((np.abs(np.asarray(v)) ** 2) @ xt)
    op = DifferentialOperator(t)
    return float(np.prod(float(x0) - x)) / math.factorial(x.size) * float(apply_operator(op, f, q))


def phi_bound_check(nodes: NodeSet, freqs, f: AnalyticFunction, x0: float, v,
                    rho_prime: float, interval=None, strict: bool = True,
                    contour: float | None = None, bound_r: float | None = None
                    ) -> tuple[float, float]:
    """Return ``(|phi_n|, c_1 ((b - a)/rho')^n)`` with ``c_1`` from the contour bound.

    ``c_1 = e^{rho' R} / (2 pi rho') * oint |f(z)| |dz|`` over the stadium at
    distance ``rho'``; pass ``contour`` to reuse a precomputed integral.
    ``freqs`` may be a plain array (repeated values allowed), in which case
    ``R`` is ``bound_r`` or just above ``max |t_k|``.
    """
    a, b = nodes.interval if interval is None else interval
    if isinstance(freqs, FrequencySet):
        r = freqs.bound
    else:
        t = np.atleast_1d(np.asarray(freqs, dtype=float))
        r = float(np.nextafter(np.max(np.abs(t)), np.inf)) if bound_r is None else float(bound_r)
        if np.any(np.abs(t) >= r):
            raise ValueError("all |t_k| must be below R")
    n = len(nodes)
    if contour is None:
        contour = contour_integral_bound(f, (a, b), rho_prime)
    c1 = math.exp(rho_prime * r) / (2 * math.pi * rho_prime) * contour
    bound = c1 * ((b - a) / rho_prime) ** n
    value = abs(phi_value(nodes, freqs, f, x0, v))
    if strict and value > bound * (1 + 1e-12):
        raise BoundViolation(f"|phi| = {value} exceeds bound {bound}", value, bound)
    return value, bound


@dataclass
class StructureCheckReport:
    draws: int
    interlacing_violations: int = 0
    max_interlacing_slack: float = -math.inf
    ratio_violations: int = 0
    max_log_ratio_over_bound: float = -math.inf
    rayleigh_violations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def random_structure_checks(draws: int, rng: RngStream, n_max: int = 6,
                            interval=(-1.0, 1.0), bound_r: float = 1.0) -> StructureCheckReport:
    """Randomized interlacing, kernel-ratio and Rayleigh-containment checks.

    Each draw picks ``n`` in ``1..n_max``, distinct nodes and ``x0`` uniform
    in the interval, frequencies uniform in ``(-R, R)``, ``v`` on the sphere
    and ``U`` Haar.
    """
    gen = rng.generator()
    a, b = interval
    rep = StructureCheckReport(draws)
    for _ in range(draws):
        n = int(gen.integers(1, n_max + 1))
        xt = gen.uniform(a, b, n + 1)
        t = gen.uniform(-bound_r, bound_r, n) * (1 - 1e-12)
        v = sample_unit_sphere_complex(n + 1, gen)
        u = sample_haar_unitary(n, gen)
        s = interlacing_sum_check(v, xt, interval, strict=False)
        rep.max_interlacing_slack = max(rep.max_interlacing_slack, s - (b - a))
        if s > (b - a) + 1e-10:
            rep.interlacing_violations += 1
        ratio = kernel_ratio_bound_check(v, u, xt, t, interval, bound_r, strict=False)
        excess = abs(math.log(ratio)) - bound_r * (b - a)
        rep.max_log_ratio_over_bound = max(rep.max_log_ratio_over_bound, excess)
        if abs(math.log(ratio)) > bound_r * (b - a) + 1e-9:
            rep.ratio_violations += 1
        q = float((np.abs(v) ** 2) @ xt)
        if q < xt.min() - 1e-14 or q > xt.max() + 1e-14:
            rep.rayleigh_violations += 1
    return rep
