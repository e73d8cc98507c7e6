import math

import numpy as np
import pytest
import mpmath
import sympy
from hypothesis import given, strategies as st

from hciz_interp.error_formulas import (
    DifferentialOperator,
    HcizEstimate,
    HcizProblem,
    apply_operator,
    compressed_diagonal,
    corollary1_error_mc,
    direct_error_exponential,
    direct_error_gaussian,
    direct_error_polynomial,
    flat_limit_check,
    hciz_z_determinant,
    hciz_z_montecarlo,
    hermite_genocchi_error_mc,
    interlacing_sum_check,
    kernel_ratio_bound_check,
    ordered_complement,
    phi_bound_check,
    random_structure_checks,
    theorem1_error_mc,
    theorem1_samples,
)
from hciz_interp.exceptions import (
    BoundViolation,
    DuplicateEntries,
    IllConditioned,
    SingularityTooClose,
)
from hciz_interp.functions import from_id
from hciz_interp.interp import FrequencySet, NodeSet
from hciz_interp.numerics.sampling import RngStream, sample_haar_unitary, sample_unit_sphere_complex

E = math.e


class TestZDeterminant:
    @pytest.mark.parametrize("x, t, expected", [
        ([2.0], [3.0], math.exp(6)),
        ([0.0, 1.0], [0.0, 1.0], E - 1),
        ([0.0, 2.0], [0.0, 1.0], (E ** 2 - 1) / 2),
    ])
    def test_examples(self, x, t, expected):
        assert hciz_z_determinant(HcizProblem(x, t)) == pytest.approx(expected, rel=1e-14)

    def test_duplicates(self):
        with pytest.raises(DuplicateEntries):
            hciz_z_determinant(HcizProblem([0.0, 0.0], [0.0, 1.0]))

    def test_symmetric_in_x_and_t(self, gen):
        x, t = gen.uniform(-1, 1, 3), gen.uniform(-1, 1, 3)
        assert hciz_z_determinant(HcizProblem(x, t)) == pytest.approx(
            hciz_z_determinant(HcizProblem(t, x)), rel=1e-12)

    def test_log_space_branch(self):
        mpmath.mp.dps = 80
        x = np.linspace(-1, 1, 16)
        t = np.linspace(-0.5, 0.7, 16)
        a = mpmath.matrix([[mpmath.exp(mpmath.mpf(tk) * mpmath.mpf(xm)) for xm in x] for tk in t])
        vv = mpmath.mpf(1)
        for l in range(16):
            for k in range(l):
                vv *= (mpmath.mpf(x[l]) - mpmath.mpf(x[k])) * (mpmath.mpf(t[l]) - mpmath.mpf(t[k]))
        beta = mpmath.fprod(mpmath.factorial(k) for k in range(16))
        ref = float(beta * mpmath.det(a) / vv)
        assert hciz_z_determinant(HcizProblem(x, t)) == pytest.approx(ref, rel=1e-5)

    def test_ill_conditioned_large_n(self):
        x = np.linspace(-1, 1, 20)
        with pytest.raises(IllConditioned):
            hciz_z_determinant(HcizProblem(x, np.linspace(-0.5, 0.7, 20)))


class TestZMonteCarlo:
    def test_zero_t(self):
        est = hciz_z_montecarlo(HcizProblem([0.3, 0.5, 0.7], [0.0, 0.0, 0.0]), 1000, RngStream(1))
        assert est.mean == 1.0 and est.std_error == 0.0
        assert est.oracle is None

    def test_n1_exact(self):
        est = hciz_z_montecarlo(HcizProblem([2.0], [3.0]), 500, RngStream(1))
        # every sample is exact; the mean may round by an ulp
        assert est.mean == pytest.approx(math.exp(6), rel=2e-16)
        assert est.std_error <= 1e-13

    def test_two_by_two(self):
        est = hciz_z_montecarlo(HcizProblem([0.0, 1.0], [0.0, 1.0]), 1_000_000, RngStream(42))
        assert est.oracle == pytest.approx(E - 1, rel=1e-15)
        assert est.z_score() <= 3

    def test_min_samples(self):
        with pytest.raises(ValueError):
            hciz_z_montecarlo(HcizProblem([0.0, 1.0], [0.0, 1.0]), 10, RngStream(0))

    def test_worker_independence(self):
        p = HcizProblem([0.0, 0.4, 1.0], [-0.3, 0.2, 0.9])
        a = hciz_z_montecarlo(p, 20_000, RngStream(3), block=4096, workers=1)
        b = hciz_z_montecarlo(p, 20_000, RngStream(3), block=4096, workers=3)
        assert a == b

    def test_to_dict(self):
        d = HcizEstimate(1.0, 0.1, 100, 1.05).to_dict()
        assert d == {"mean": 1.0, "std_error": 0.1, "samples": 100, "oracle": 1.05}


class TestDifferentialOperator:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_symbolic_eigenfunction(self, n, gen):
        ts = gen.integers(-3, 4, n)
        q, t = sympy.symbols("q t")
        expr = sympy.exp(t * q)
        for tk in ts:
            expr = sympy.diff(expr, q) - int(tk) * expr
        expected = sympy.simplify(expr / sympy.exp(t * q))
        assert sympy.expand(expected - sympy.prod([t - int(tk) for tk in ts])) == 0
        op = DifferentialOperator(ts)
        for tv in (-1.5, 0.25, 2.0):
            got = apply_operator(op, from_id(f"exp:{tv}"), 0.3)
            assert got == pytest.approx(math.exp(0.3 * tv) * np.prod(tv - ts), rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("t, fid, q, expected", [
        ([0.0], "poly:0,1", 1.0, 1.0),
        ([1.0, 1.0], "exp:2", 0.0, 1.0),
        ([0.0, 1.0], "exp:3", 0.0, 6.0),
    ])
    def test_examples(self, t, fid, q, expected):
        assert apply_operator(DifferentialOperator(t), from_id(fid), q) == pytest.approx(expected)

    def test_coefficients(self):
        np.testing.assert_allclose(DifferentialOperator([1.0, 1.0]).coefficients, [1, -2, 1])


class TestExponentialErrorFormula:
    def test_trivial_case(self):
        p = HcizProblem([0.0], [0.0], x0=1.0)
        f = from_id("poly:0,1")
        est = theorem1_error_mc(p, f, 1000, RngStream(1))
        assert est.mean == 1.0 and est.std_error == 0.0
        assert direct_error_exponential(p, f) == pytest.approx(1.0)

    def test_two_node_example(self):
        p = HcizProblem([-0.5, 0.5], [-0.5, 0.5], x0=0.0)
        f = from_id("exp:0.3")
        est = theorem1_error_mc(p, f, 100_000, RngStream(3))
        assert est.z_score(direct_error_exponential(p, f)) <= 3

    def test_basis_function_has_zero_error(self):
        p = HcizProblem([-0.5, 0.1, 0.6], [-0.7, 0.2, 0.4], x0=0.9)
        f = from_id("exp:0.2")
        assert abs(direct_error_exponential(p, f)) < 1e-14
        est = theorem1_error_mc(p, f, 50_000, RngStream(4))
        # the integrand vanishes identically up to roundoff
        assert est.z_score(0.0, atol=1e-14) <= 3

    def test_mc_z_route(self):
        p = HcizProblem([-0.5, 0.5], [-0.5, 0.5], x0=0.0)
        f = from_id("exp:0.3")
        est = theorem1_error_mc(p, f, 100_000, RngStream(3), z_route="montecarlo")
        assert est.z_score(direct_error_exponential(p, f)) <= 4

    def test_rejects_x0_on_node(self):
        with pytest.raises(ValueError):
            theorem1_error_mc(HcizProblem([0.0, 1.0], [0.0, 1.0], x0=1.0), from_id("exp:1"),
                              100, RngStream(0))

    def test_sample_invariants(self):
        p = HcizProblem([-0.8, -0.1, 0.5], [0.3, -0.6, 0.9], x0=0.7)
        s = theorem1_samples(p, from_id("runge"), RngStream(8).generator(), 20_000)
        xt = p.x_tilde
        assert np.all(s.q >= xt.min() - 1e-14) and np.all(s.q <= xt.max() + 1e-14)
        assert np.all(s.k_tilde > 0) and np.all(s.k > 0)
        assert s.u.shape == (20_000, 3, 3)


class TestGaussianErrorFormula:
    def test_gauss_shift_single_node(self):
        f = from_id("gauss-shift:0.3")
        est = corollary1_error_mc([0.3], f, -0.4, 20_000, RngStream(2))
        assert abs(direct_error_gaussian([0.3], f, -0.4)) < 1e-15
        assert est.z_score(0.0) <= 3

    def test_constant(self):
        direct = direct_error_gaussian([0.0], from_id("poly:1"), 0.5)
        assert direct == pytest.approx(1 - math.exp(-0.125), rel=1e-14)
        est = corollary1_error_mc([0.0], from_id("poly:1"), 0.5, 100_000, RngStream(5))
        assert est.z_score(direct) <= 3

    def test_random_two_nodes(self):
        nodes = NodeSet.from_strategy("random-uniform", 2, (-1, 1), RngStream(12))
        f = from_id("rational-pole:5")
        est = corollary1_error_mc(nodes, f, 0.05, 100_000, RngStream(6))
        assert est.z_score(direct_error_gaussian(nodes, f, 0.05)) <= 3


class TestHermiteGenocchi:
    def test_quadratic(self):
        est = hermite_genocchi_error_mc([0.0, 1.0], from_id("poly:0,0,1"), 0.5, 1000, RngStream(1))
        assert est.mean == pytest.approx(-0.25, abs=1e-12)
        assert est.std_error < 1e-15

    def test_low_degree_zero(self):
        est = hermite_genocchi_error_mc([0.0, 0.3, 1.0], from_id("poly:1,2,3"), 0.5, 1000,
                                        RngStream(1))
        assert est.mean == 0.0

    def test_exp_three_nodes(self):
        nodes, f = [0.0, 0.5, 1.0], from_id("exp:1")
        est = hermite_genocchi_error_mc(nodes, f, 0.25, 100_000, RngStream(1))
        assert est.z_score(direct_error_polynomial(nodes, f, 0.25)) <= 3


class TestFlatLimit:
    def test_polynomial_vanishes_with_eps(self):
        # exponentials do not reproduce polynomials at finite eps
        ns = NodeSet(np.linspace(-1, 1, 4))
        table = flat_limit_check(ns, from_id("poly:1,-1,2"), (1e-1, 1e-2, 1e-3))
        assert table.monotone
        assert table.sup_diff[-1] <= 1e-5

    def test_runge(self):
        table = flat_limit_check(NodeSet(np.linspace(-1, 1, 5)), from_id("runge"))
        assert table.monotone
        assert table.first_order()

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            flat_limit_check(NodeSet([0.0, 1.0]), from_id("runge"), (1e-2, 1e-1))


def random_xt(gen, n):
    return gen.uniform(-1, 1, n + 1)


class TestOrderedComplement:
    def test_e1(self):
        xt = np.array([0.9, 0.4, -0.3, 0.1])
        p = ordered_complement(np.eye(4)[0].astype(complex), xt)
        m = p.conj().T @ (xt[:, None] * p)
        np.testing.assert_allclose(m, np.diag(xt[1:]), atol=1e-14)

    @given(n=st.integers(1, 6), seed=st.integers(0, 2 ** 32))
    def test_diagonal_and_interlacing(self, n, seed):
        gen = RngStream(seed).generator()
        xt = random_xt(gen, n)
        v = sample_unit_sphere_complex(n + 1, gen)
        p = ordered_complement(v, xt)
        m = p.conj().T @ (xt[:, None] * p)
        off = m - np.diag(np.diag(m))
        assert np.max(np.abs(off)) <= 1e-10 * np.max(np.abs(xt))
        assert np.max(np.abs(p.conj().T @ p - np.eye(n))) <= 1e-12
        assert np.max(np.abs(v.conj() @ p)) <= 1e-12
        lam = np.sort(compressed_diagonal(p, xt))
        s = np.sort(xt)
        assert np.all(lam >= s[:-1] - 1e-12) and np.all(lam <= s[1:] + 1e-12)
        # sorted node order is respected
        order = np.argsort(xt[1:])
        assert np.all(np.diff(compressed_diagonal(p, xt)[order]) >= -1e-12)


class TestStructuralBounds:
    def test_interlacing_e1(self):
        assert interlacing_sum_check(np.eye(3)[0].astype(complex), [0.2, -0.5, 0.7], (-1, 1)) \
            == pytest.approx(0.0, abs=1e-14)

    def test_interlacing_n1(self, gen):
        for _ in range(50):
            v = sample_unit_sphere_complex(2, gen)
            assert interlacing_sum_check(v, gen.uniform(0, 2, 2), (0, 2)) <= 2 + 1e-10

    def test_interlacing_outside(self):
        with pytest.raises(ValueError):
            interlacing_sum_check(np.eye(2)[0].astype(complex), [3.0, 0.0], (-1, 1))

    def test_ratio_trivial(self, gen):
        xt = random_xt(gen, 3)
        v = sample_unit_sphere_complex(4, gen)
        u = sample_haar_unitary(3, gen)
        assert kernel_ratio_bound_check(v, u, xt, np.zeros(3), (-1, 1), 1.0) == 1.0
        e1 = np.eye(4)[0].astype(complex)
        assert kernel_ratio_bound_check(e1, u, xt, [0.3, -0.2, 0.5], (-1, 1), 1.0) \
            == pytest.approx(1.0, abs=1e-14)

    def test_ratio_violation_raises(self, gen):
        # R smaller than the frequencies is refused, not silently accepted
        with pytest.raises(ValueError):
            kernel_ratio_bound_check(sample_unit_sphere_complex(3, gen), np.eye(2), random_xt(gen, 2),
                                     [0.5, 2.0], (-1, 1), 1.0)

    def test_randomized(self):
        rep = random_structure_checks(2000, RngStream(17), n_max=6)
        assert rep.interlacing_violations == 0
        assert rep.ratio_violations == 0
        assert rep.rayleigh_violations == 0


class TestPhiBound:
    def test_polynomial_zero(self, gen):
        nodes = NodeSet([-0.5, 0.0, 0.5], (-1, 1))
        v = sample_unit_sphere_complex(4, gen)
        value, bound = phi_bound_check(nodes, np.zeros(3), from_id("poly:1,2"), 0.3, v, 2.0,
                                       bound_r=1.0)
        assert value == 0.0 < bound

    def test_exp_single_node(self, gen):
        v = sample_unit_sphere_complex(2, gen)
        value, bound = phi_bound_check(NodeSet([0.0], (0, 1)), FrequencySet([0.0], bound=0.5),
                                       from_id("exp:1"), 1.0, v, 2.0)
        assert value <= E and value <= bound

    def test_too_close(self, gen):
        with pytest.raises(SingularityTooClose):
            phi_bound_check(NodeSet([0.0, 0.5], (-1, 1)), FrequencySet([0.0, 0.5]), from_id("runge"),
                            0.3, sample_unit_sphere_complex(3, gen), 0.3)

    def test_strict_raises(self, gen):
        nodes = NodeSet([0.0], (0, 1))
        with pytest.raises(BoundViolation):
            phi_bound_check(nodes, FrequencySet([0.0], bound=0.5), from_id("exp:1"), 1.0,
                            sample_unit_sphere_complex(2, gen), 2.0, contour=1e-9)

    def test_randomized_catalog(self):
        gen = RngStream(23).generator()
        ids = ["rational-pole:5", "rational-pole:2", "runge", "exp:1", "gauss-shift:0.2"]
        for fid in ids:
            f = from_id(fid)
            rho = f.analyticity_distance((-1, 1))
            rho_p = 0.9 * rho if math.isfinite(rho) else 2.0
            contour = None
            for _ in range(200):
                n = int(gen.integers(1, 6))
                nodes = NodeSet(np.sort(gen.uniform(-1, 1, n)), (-1, 1))
                freqs = FrequencySet(gen.uniform(-1, 1, n), bound=1.0)
                if contour is None:
                    from hciz_interp.functions import contour_integral_bound
                    contour = contour_integral_bound(f, (-1, 1), rho_p)
                v = sample_unit_sphere_complex(n + 1, gen)
                phi_bound_check(nodes, freqs, f, float(gen.uniform(-1, 1)), v, rho_p,
                                interval=(-1, 1), contour=contour)
