import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from region_prove.tolerance import (
    DoublingDiverged,
    ToleranceParams,
    confidence_joint,
    confidence_single,
    doubling_m_schedule,
    max_regions,
    required_sample_size,
)


def _joint_decimal(n, rate, m):
    getcontext().prec = 60
    r = Decimal(repr(rate))
    return (1 - r**n) ** m


def _search_n(alpha, rate, m):
    """Independent oracle: exponential then binary search with 60-digit arithmetic."""
    a = Decimal(repr(alpha))
    hi = 1
    while _joint_decimal(hi, rate, m) < a:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _joint_decimal(mid, rate, m) >= a:
            hi = mid
        else:
            lo = mid
    return hi


def test_required_sample_size_headline():
    n = required_sample_size(0.999, 0.995, 10_000)
    assert n == _search_n(0.999, 0.995, 10_000) == 3216
    assert n <= 3250


def test_required_sample_size_bounded_by_3250_for_smaller_m():
    for m in (1, 10, 100, 1000, 5000, 10_000):
        assert required_sample_size(0.999, 0.995, m) <= 3250


def test_required_sample_size_trivial():
    assert required_sample_size(0.5, 0.5, 1) == 1


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([0.9, 0.99, 0.999, 0.9999]),
    st.sampled_from([0.9, 0.95, 0.99, 0.995, 0.999]),
    st.integers(1, 50_000),
)
def test_required_sample_size_matches_oracle(alpha, rate, m):
    assert required_sample_size(alpha, rate, m) == _search_n(alpha, rate, m)


def test_confidence_single_values():
    assert confidence_single(1, 0.5) == 0.5
    miss = 1.0 - confidence_single(3500, 0.995)
    assert miss == pytest.approx(2.40e-8, rel=0.01)
    assert miss == pytest.approx(float(Decimal("0.995") ** 3500), rel=1e-9)


def test_confidence_single_decreases_towards_rate_one():
    rates = [0.9, 0.99, 0.999, 0.9999, 0.99999]
    vals = [confidence_single(100, r) for r in rates]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_confidence_joint_values():
    assert confidence_joint(37, 0.9, 1) == confidence_single(37, 0.9)
    assert confidence_joint(3500, 0.995, 10_000) == pytest.approx(0.99976, abs=1e-5)
    assert confidence_joint(3500, 0.995, 10_000) == pytest.approx(float(_joint_decimal(3500, 0.995, 10_000)), rel=1e-12)
    with pytest.raises(ValueError):
        confidence_joint(10, 0.9, 0)


@pytest.mark.parametrize("n,rate", [(1, 0.5), (20, 0.9), (3500, 0.995), (500, 0.999)])
def test_wilks_quadrature(n, rate):
    # The safe mass below the sample minimum follows Beta(1, n); P(mass <= 1 - rate) is 1 - rate**n.
    val, _ = integrate.quad(lambda u: n * (1 - u) ** (n - 1), 0.0, 1.0 - rate, limit=200)
    assert val == pytest.approx(confidence_single(n, rate), rel=1e-9)
    assert stats.beta(1, n).cdf(1 - rate) == pytest.approx(confidence_single(n, rate), rel=1e-9)


def test_wilks_monte_carlo():
    # 20 samples, rate 0.9: the min sample bounds the 10% quantile with probability 1 - 0.9^20
    rng = np.random.default_rng(0)
    mins = rng.random((200_000, 20)).min(axis=1)
    hit = np.mean(mins <= 0.1)
    assert hit == pytest.approx(confidence_single(20, 0.9), abs=0.003)


@settings(max_examples=50)
@given(st.integers(1, 5000), st.sampled_from([0.9, 0.99, 0.995]), st.integers(1, 10**6))
def test_joint_monotone(n, rate, m):
    c = confidence_joint(n, rate, m)
    assert confidence_joint(n + 1, rate, m) >= c
    assert confidence_joint(n, rate, m + 1) <= c


def test_max_regions_is_tight():
    m = max_regions(3500, 0.995, 0.999)
    assert confidence_joint(3500, 0.995, m) >= 0.999
    assert confidence_joint(3500, 0.995, m + 1) < 0.999
    assert required_sample_size(0.999, 0.995, m) <= 3500


def test_tolerance_params():
    t = ToleranceParams.for_region_bound(0.999, 0.995, 10_000)
    assert t.n == 3216 and t.consistent
    d = ToleranceParams.for_sample_size()
    assert d.n == 3500 and d.consistent and d.m == max_regions(3500, 0.995, 0.999)
    assert not ToleranceParams(0.999, 0.995, 100, 10).consistent
    with pytest.raises(ValueError):
        ToleranceParams(1.0, 0.995, 100, 1)


def test_doubling_examples():
    t = doubling_m_schedule(lambda n: 5)
    assert t.m == 8 and t.n == required_sample_size(0.999, 0.995, 8)
    assert doubling_m_schedule(lambda n: 1).m == 1
    seen = []

    def grows(n):
        seen.append(n)
        return 2 ** len(seen)

    with pytest.raises(DoublingDiverged):
        doubling_m_schedule(grows, max_doublings=10)
    assert len(seen) == 11


def test_closed_form_close_to_exact():
    for m in (1, 7, 10_000, 10**6):
        closed = math.ceil(math.log(1 - 0.999 ** (1 / m)) / math.log(0.995))
        assert abs(required_sample_size(0.999, 0.995, m) - closed) <= 1
