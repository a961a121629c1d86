import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reprokrylov.eft import FpRangeError, ResultError, fma, two_prod, two_sum
from reprokrylov.oracle import ExactValue

finite = st.floats(allow_nan=False, allow_infinity=False)
# pairs whose sum cannot overflow
safe_sum = st.floats(min_value=-1e307, max_value=1e307, allow_nan=False)
# factors whose product and its error term stay representable
safe_factor = st.floats(
    min_value=-1e150, max_value=1e150, allow_nan=False
).filter(lambda x: x == 0.0 or abs(x) > 1e-120)


def exact_eq_sum(a, b, r, s):
    return (
        ExactValue.from_float(a) + ExactValue.from_float(b)
        == ExactValue.from_float(r) + ExactValue.from_float(s)
    )


class TestFma:
    def test_witness_bit(self):
        # only a fused multiply-add can see this 2^-104 residual
        x = 1.0 + 2.0**-52
        assert fma(x, x, -(1.0 + 2.0**-51)) == 2.0**-104

    def test_basic(self):
        assert fma(2.0, 3.0, 4.0) == 10.0
        assert fma(0.0, 1e308, 1.0) == 1.0


class TestTwoSum:
    def test_small_term_preserved(self):
        assert two_sum(1.0, 2.0**-60) == (1.0, 2.0**-60)

    def test_zero_identity(self):
        for x in (1.0, -2.5, 1e-300, 3.7e200):
            assert two_sum(x, 0.0) == (x, 0.0)

    def test_round_to_even_drop(self):
        assert two_sum(2.0**53, 1.0) == (2.0**53, 1.0)

    def test_result_is_float_sum(self):
        r, s = two_sum(0.1, 0.2)
        assert r == 0.1 + 0.2
        exact_err = (
            ExactValue.from_float(0.1)
            + ExactValue.from_float(0.2)
            - ExactValue.from_float(r)
        )
        assert ExactValue.from_float(s) == exact_err
        # unpacks as a named tuple
        out = two_sum(1.5, 2.25)
        assert isinstance(out, ResultError)
        assert out.result == 3.75 and out.error == 0.0

    @given(safe_sum, safe_sum)
    def test_exactness(self, a, b):
        r, s = two_sum(a, b)
        assert r == a + b
        assert exact_eq_sum(a, b, r, s)

    @given(safe_sum, safe_sum)
    def test_symmetry(self, a, b):
        ra, sa = two_sum(a, b)
        rb, sb = two_sum(b, a)
        assert (ra, sa) == (rb, sb)

    def test_determinism(self):
        pairs = [(0.1, 0.7), (1e300, -3.5e299), (2.0**-700, 1.0)]
        first = [two_sum(a, b) for a, b in pairs]
        for _ in range(5):
            assert [two_sum(a, b) for a, b in pairs] == first

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            two_sum(math.nan, 1.0)
        with pytest.raises(ValueError):
            two_sum(1.0, math.inf)

    def test_overflow_error(self):
        with pytest.raises(OverflowError):
            two_sum(1.7e308, 1.7e308)


class TestTwoProd:
    def test_one_bit_beyond_precision(self):
        x = 1.0 + 2.0**-52
        assert two_prod(x, x) == (1.0 + 2.0**-51, 2.0**-104)

    def test_zero_annihilator(self):
        assert two_prod(3.5, 0.0) == (0.0, 0.0)
        assert two_prod(0.0, -1e300) == (0.0, 0.0)

    def test_third_times_three(self):
        third = 1.0 / 3.0
        r, s = two_prod(3.0, third)
        assert r == 3.0 * third
        exact = ExactValue.from_product(3.0, third)
        assert exact == ExactValue.from_float(r) + ExactValue.from_float(s)

    @given(safe_factor, safe_factor)
    def test_exactness(self, a, b):
        r, s = two_prod(a, b)
        assert r == a * b
        assert ExactValue.from_product(a, b) == (
            ExactValue.from_float(r) + ExactValue.from_float(s)
        )

    def test_exact_subnormal_products_allowed(self):
        # products whose error term is exactly zero are fine even deep
        # in the subnormal range
        r, s = two_prod(2.0**-537, 2.0**-537)
        assert (r, s) == (2.0**-1074, 0.0)
        r, s = two_prod(1.2345e-300, 1.0)
        assert (r, s) == (1.2345e-300, 0.0)

    def test_inexact_subnormal_error_raises(self):
        a = (1.0 + 2.0**-52) * 2.0**-537
        with pytest.raises(FpRangeError):
            two_prod(a, a)

    def test_underflow_to_zero_with_nonzero_factors_raises(self):
        with pytest.raises(FpRangeError):
            two_prod(1e-200, 1e-200)

    def test_overflow_error(self):
        with pytest.raises(OverflowError):
            two_prod(1e200, 1e200)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            two_prod(math.nan, 1.0)
        with pytest.raises(ValueError):
            two_prod(math.inf, 0.0)

    def test_range_error_is_arithmetic_error(self):
        assert issubclass(FpRangeError, ArithmeticError)


class TestCorpus:
    def test_wide_exponent_corpus(self, rng):
        # spans the usable exponent window in both directions
        n = 2000
        ea = rng.uniform(-996, 996, n)
        eb = rng.uniform(np.maximum(-996, -960 - ea), np.minimum(996, 1016 - ea))
        sgn = lambda k: np.where(rng.random(k) < 0.5, -1.0, 1.0)
        a = sgn(n) * (1 + rng.random(n)) * np.exp2(ea)
        b = sgn(n) * (1 + rng.random(n)) * np.exp2(eb)
        for x, y in zip(a.tolist(), b.tolist()):
            r, s = two_sum(x, y)
            assert exact_eq_sum(x, y, r, s)
            r, s = two_prod(x, y)
            assert ExactValue.from_product(x, y) == (
                ExactValue.from_float(r) + ExactValue.from_float(s)
            )
