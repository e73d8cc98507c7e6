import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import polynomial as P

from hciz_interp.numerics.jet import Jet


def poly_jet(c, q, order):
    out, d = [], np.asarray(c, float)
    for _ in range(order + 1):
        out.append(P.polyval(q, d) if d.size else 0.0)
        d = P.polyder(d) if d.size > 1 else np.zeros(0)
    return Jet(np.array(out))


coeffs = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=4)


class TestJet:
    def test_variable(self):
        j = Jet.variable(2.0, 3)
        np.testing.assert_array_equal(j.coeffs, [2.0, 1.0, 0.0, 0.0])

    @given(coeffs, coeffs, st.integers(-3, 3).map(float))
    def test_product_rule_polynomials(self, a, b, q):
        order = 6
        prod = poly_jet(a, q, order) * poly_jet(b, q, order)
        expected = poly_jet(P.polymul(a, b), q, order)
        np.testing.assert_allclose(prod.coeffs, expected.coeffs, rtol=0, atol=1e-9)

    @pytest.mark.parametrize("q", [-1.0, 0.0, 0.7])
    def test_exp_of_square(self, q):
        # d^k/dq^k exp(q^2/2) = He-like polynomials; check against finite sums
        x = Jet.variable(q, 4)
        h = (x * x * 0.5).exp()
        g = math.exp(q * q / 2)
        expected = [g, q * g, (1 + q * q) * g, (3 * q + q ** 3) * g, (3 + 6 * q * q + q ** 4) * g]
        np.testing.assert_allclose(h.coeffs, expected, rtol=1e-14)

    def test_exp_linear(self):
        t, q = 0.3, 1.5
        h = (Jet.variable(q, 5) * t).exp()
        np.testing.assert_allclose(h.coeffs, [t ** k * math.exp(t * q) for k in range(6)], rtol=1e-15)

    def test_order_mismatch(self):
        with pytest.raises(ValueError):
            Jet.variable(0.0, 2) + Jet.variable(0.0, 3)

    def test_arithmetic_and_derivative(self):
        x = Jet.variable(2.0, 2)
        y = 3.0 - x + 1.0
        np.testing.assert_array_equal(y.coeffs, [2.0, -1.0, 0.0])
        np.testing.assert_array_equal((x * x).derivative().coeffs, [4.0, 2.0])
