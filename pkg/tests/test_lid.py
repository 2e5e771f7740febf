import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnperturb.lid import (
    DegenerateProfileError,
    DeltaSample,
    NeighborProfile,
    ZeroDistanceError,
    bin_by_lid,
    delta_and_lid,
    hill_estimate,
    hill_estimates,
)
from nnperturb.model import RankPair
from nnperturb.synthetic import make_power_law, sample_order_stats


def naive_hill(d):
    k = len(d)
    return -1.0 / (sum(math.log(v / d[-1]) for v in d) / k)


def test_profile_validation():
    with pytest.raises(ValueError):
        NeighborProfile(0, [1.0])
    with pytest.raises(ValueError):
        NeighborProfile(0, [2.0, 1.0])
    with pytest.raises(ValueError):
        NeighborProfile(0, [-1.0, 1.0])
    assert NeighborProfile(0, [0.0, 1.0]).has_zero_distance


def test_hill_small_case():
    # mean of log(1/4), log(2/4), log(4/4) = -log(8)/3 = -log 2, so ell_hat = 1/log 2
    est = hill_estimate(NeighborProfile("q", [1.0, 2.0, 4.0]))
    assert est.ell_hat == pytest.approx(1 / math.log(2))
    assert est.k_used == 3


def test_hill_errors():
    with pytest.raises(DegenerateProfileError):
        hill_estimate(NeighborProfile(0, [3.0, 3.0, 3.0]))
    with pytest.raises(ZeroDistanceError):
        hill_estimate(NeighborProfile(0, [0.0, 1.0, 2.0]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=50), st.floats(1e-3, 1e3))
def test_hill_matches_naive_and_is_scale_invariant(vals, scale):
    d = sorted(vals)
    if d[0] == d[-1]:
        return
    a = hill_estimate(NeighborProfile(0, d)).ell_hat
    assert a == pytest.approx(naive_hill(d), rel=1e-9)
    b = hill_estimate(NeighborProfile(0, [v * scale for v in d])).ell_hat
    assert b == pytest.approx(a, rel=1e-9)


def test_vectorized_hill_matches_scalar_and_flags():
    rows = sample_order_stats(make_power_law(8), 10_000, 20, 0, 30)
    rows[3] = 1.0
    rows[5, 0] = 0.0
    est = hill_estimates(rows)
    assert np.isnan(est[3]) and np.isnan(est[5])
    for i in (0, 1, 29):
        assert est[i] == pytest.approx(hill_estimate(NeighborProfile(i, rows[i])).ell_hat, rel=1e-12)


def test_hill_concentrates_near_truth():
    rows = sample_order_stats(make_power_law(10), 10**6, 100, 1, 10_000)
    assert 9 <= np.median(hill_estimates(rows)) <= 11


def test_delta_and_lid_uses_first_kx():
    p = NeighborProfile(7, [1.0, 2.0, 4.0, 100.0])
    s = delta_and_lid(p, RankPair(1, 3))
    assert s.delta == pytest.approx(0.75)
    assert s.ell_hat == pytest.approx(1 / math.log(2))
    assert s.query_id == 7 and not s.tie
    with pytest.raises(ValueError):
        delta_and_lid(p, RankPair(1, 5))


def test_delta_and_lid_tie_is_flagged():
    s = delta_and_lid(NeighborProfile(0, [1.0, 2.0, 2.0]), RankPair(2, 3))
    assert s.tie and s.delta == 0.0


def test_bin_by_lid_partitions():
    samples = [DeltaSample(0.1, e) for e in (0.5, 4.99, 5.0, 12.0, 7.5)]
    bins = bin_by_lid(samples, 5.0)
    assert list(bins) == [0, 1, 2]
    assert [len(v) for v in bins.values()] == [2, 2, 1]
    assert sum(len(v) for v in bins.values()) == len(samples)
    with pytest.raises(ValueError):
        bin_by_lid(samples, 0)
