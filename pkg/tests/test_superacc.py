import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reprokrylov.oracle import oracle_sum
from reprokrylov.superacc import (
    CARRY_BITS,
    DIGIT_BITS,
    DIGITS,
    LongAccumulator,
    superacc_merge,
)

finite = st.floats(allow_nan=False, allow_infinity=False)


def acc_of(values) -> LongAccumulator:
    acc = LongAccumulator.new()
    for v in values:
        acc.accumulate(v)
    return acc


def all_association_trees(items):
    """Every full binary merge tree over the given ordered leaves."""
    if len(items) == 1:
        yield items[0]
        return
    for split in range(1, len(items)):
        for left in all_association_trees(items[:split]):
            for right in all_association_trees(items[split:]):
                yield superacc_merge(left, right)


class TestAccumulate:
    def test_zero_value(self):
        acc = LongAccumulator.new()
        acc.accumulate(0.0)
        assert acc.is_zero()
        assert acc.round_nearest() == 0.0

    def test_identity_round_trip(self, rng):
        xs = rng.normal(size=10**5) * np.exp2(rng.uniform(-320, 320, 10**5))
        acc = LongAccumulator.new()
        for x in xs.tolist():
            acc.digits[:] = 0
            acc.ops_since_normalize = 0
            _ = acc.accumulate(x)
            assert acc.round_nearest() == x

    def test_exact_cancellation(self):
        acc = acc_of([1e308, 17.0, -1e308])
        assert acc.round_nearest() == 17.0

    def test_subnormal_identity(self):
        for x in (5e-324, -5e-324, 1.5e-310, 2.0**-1074):
            acc = acc_of([x])
            assert acc.round_nearest() == x

    def test_rejects_non_finite(self):
        acc = LongAccumulator.new()
        with pytest.raises(ValueError):
            acc.accumulate(math.nan)

    def test_many_additions_stay_exact_past_carry_limit(self):
        # crosses the automatic-normalize threshold several times
        acc = LongAccumulator.new()
        for _ in range(3 * 2 ** (CARRY_BITS - 1)):
            acc.accumulate(1.0 + 2.0**-52)
        n = 3 * 2 ** (CARRY_BITS - 1)
        assert acc.round_nearest() == oracle_sum(np.full(n, 1.0 + 2.0**-52))


class TestNormalize:
    def test_idempotent(self, rng):
        acc = acc_of(rng.normal(size=100) * np.exp2(rng.uniform(-100, 100, 100)))
        acc.normalize()
        once = acc.digits.copy()
        acc.normalize()
        assert np.array_equal(acc.digits, once)

    def test_single_carry(self):
        acc = LongAccumulator.new()
        acc.digits[5] = 1 << DIGIT_BITS
        acc.ops_since_normalize = 1
        acc.normalize()
        assert acc.digits[5] == 0
        assert acc.digits[6] == 1
        assert not acc.overflowed

    def test_canonical_digits(self, rng):
        acc = acc_of(rng.normal(size=500) * np.exp2(rng.uniform(-300, 300, 500)))
        acc.normalize()
        assert np.all(acc.digits[:-1] >= 0)
        assert np.all(acc.digits[:-1] < (1 << DIGIT_BITS))

    def test_value_unchanged(self, rng):
        xs = rng.normal(size=200) * np.exp2(rng.uniform(-200, 200, 200))
        acc = acc_of(xs)
        before = acc.copy().round_nearest()
        acc.normalize()
        assert acc.round_nearest() == before == oracle_sum(xs)

    def test_huge_sums_stay_in_span(self):
        # the span tops out at 2^1110, far above any feasible sum of
        # doubles; a few thousand max-magnitude addends are exact
        acc = LongAccumulator.new()
        for _ in range(2200):
            acc.accumulate(1.7e308)
        acc.normalize()
        assert not acc.overflowed
        assert acc.round_nearest() == math.inf  # beyond binary64, not the span

    def test_overflow_status(self):
        # the span can only be exceeded synthetically: force a carry
        # out of the top digit
        acc = LongAccumulator.new()
        acc.digits[-1] = 1 << DIGIT_BITS
        acc.ops_since_normalize = 1
        acc.normalize()
        assert acc.overflowed
        with pytest.raises(OverflowError):
            acc.round_nearest()
        with pytest.raises(OverflowError):
            acc.accumulate(1.0)
        with pytest.raises(OverflowError):
            superacc_merge(acc, LongAccumulator.new())


class TestRound:
    def test_zero(self):
        r = LongAccumulator.new().round_nearest()
        assert r == 0.0 and math.copysign(1.0, r) == 1.0

    @given(finite)
    def test_identity(self, x):
        assert acc_of([x]).round_nearest() == x

    def test_random_sums_match_oracle(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 60))
            xs = rng.normal(size=n) * np.exp2(rng.uniform(-320, 320, n))
            assert acc_of(xs).round_nearest() == oracle_sum(xs)

    def test_sticky_below_subnormal_threshold(self):
        # 2^-1074 + 2^-1074 is exact; plus anything tiny must not be lost
        acc = acc_of([2.0**-1074, 2.0**-1074])
        assert acc.round_nearest() == 2.0**-1073

    def test_rounds_to_infinity_beyond_range(self):
        acc = acc_of([1.7e308, 1.7e308])
        assert acc.round_nearest() == math.inf
        acc = acc_of([-1.7e308, -1.7e308])
        assert acc.round_nearest() == -math.inf

    def test_round_does_not_change_value(self, rng):
        xs = rng.normal(size=50)
        acc = acc_of(xs)
        first = acc.round_nearest()
        assert acc.round_nearest() == first


class TestMerge:
    def test_merge_with_empty(self, rng):
        a = acc_of(rng.normal(size=40))
        out = superacc_merge(a, LongAccumulator.new())
        a.normalize()
        assert np.array_equal(out.digits, a.digits)
        assert out.round_nearest() == a.round_nearest()

    def test_commutative_digitwise(self, rng):
        for _ in range(20):
            a = acc_of(rng.normal(size=30) * np.exp2(rng.uniform(-200, 200, 30)))
            b = acc_of(rng.normal(size=30) * np.exp2(rng.uniform(-200, 200, 30)))
            ab = superacc_merge(a, b)
            ba = superacc_merge(b, a)
            assert np.array_equal(ab.digits, ba.digits)

    def test_merge_is_exact_sum(self, rng):
        xs = rng.normal(size=60) * np.exp2(rng.uniform(-150, 150, 60))
        a = acc_of(xs[:30])
        b = acc_of(xs[30:])
        assert superacc_merge(a, b).round_nearest() == oracle_sum(xs)

    def test_does_not_mutate_operands(self, rng):
        a = acc_of(rng.normal(size=10))
        b = acc_of(rng.normal(size=10))
        da, ob = a.digits.copy(), b.digits.copy()
        oa, obops = a.ops_since_normalize, b.ops_since_normalize
        superacc_merge(a, b)
        assert np.array_equal(b.digits, ob) and b.ops_since_normalize == obops

    def test_associations_match_oracle(self, rng):
        xs = [rng.normal(size=20) * np.exp2(rng.uniform(-250, 250, 20)) for _ in range(5)]
        parts = [acc_of(v) for v in xs]
        expected = oracle_sum(np.concatenate(xs))
        for tree in all_association_trees(parts):
            assert tree.round_nearest() == expected

    def test_permuted_merge_orders_on_eight(self, rng):
        xs = [rng.normal(size=10) * np.exp2(rng.uniform(-200, 200, 10)) for _ in range(8)]
        parts = [acc_of(v) for v in xs]
        expected = oracle_sum(np.concatenate(xs))
        orders = [tuple(rng.permutation(8)) for _ in range(100)]
        for order in orders:
            acc = parts[order[0]].copy()
            for i in order[1:]:
                acc.merge(parts[i])
            assert acc.round_nearest() == expected

    def test_merge_type_error(self):
        with pytest.raises(TypeError):
            LongAccumulator.new().merge(1.0)


class TestSerialization:
    def test_round_trip(self, rng):
        acc = acc_of(rng.normal(size=100) * np.exp2(rng.uniform(-300, 300, 100)))
        blob = acc.to_bytes()
        assert len(blob) == 12 + DIGITS * 8
        back = LongAccumulator.from_bytes(blob)
        assert np.array_equal(back.digits, acc.digits)
        assert back.ops_since_normalize == acc.ops_since_normalize
        assert back.overflowed == acc.overflowed
        assert back.round_nearest() == acc.round_nearest()

    def test_golden_zero_blob(self):
        assert LongAccumulator.new().to_bytes() == (
            b"RKACC\x01\x00\x00\x00\x00\x00\x00" + b"\x00" * (DIGITS * 8)
        )

    def test_bad_magic(self):
        blob = bytearray(LongAccumulator.new().to_bytes())
        blob[0] = ord("X")
        with pytest.raises(ValueError):
            LongAccumulator.from_bytes(bytes(blob))

    def test_bad_length(self):
        with pytest.raises(ValueError):
            LongAccumulator.from_bytes(b"RKACC\x01" + b"\x00" * 10)

    def test_non_canonical_digits_rejected(self):
        blob = bytearray(LongAccumulator.new().to_bytes())
        # ops == 0 but a lower digit is negative: not canonical
        blob[12:20] = (-5).to_bytes(8, "little", signed=True)
        with pytest.raises(ValueError):
            LongAccumulator.from_bytes(bytes(blob))

    def test_merge_after_transport(self, rng):
        xs = rng.normal(size=40) * np.exp2(rng.uniform(-100, 100, 40))
        a = acc_of(xs[:20])
        b = acc_of(xs[20:])
        b2 = LongAccumulator.from_bytes(b.to_bytes())
        assert superacc_merge(a, b2).round_nearest() == oracle_sum(xs)
