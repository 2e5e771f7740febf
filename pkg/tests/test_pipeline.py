import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnperturb.lid import NeighborProfile
from nnperturb.model import AsymptoticDeltaModel, LidIndex, RankPair, sample_asymptotic
from nnperturb.pipeline import (
    BinnedKsTable,
    ComparisonReport,
    ConvergenceTable,
    DeltaSampleSet,
    JointReport,
    analyze,
    binned_ks_study,
    compare_to_theory,
    convergence_study,
    joint_compare,
    measure_all,
    measure_array,
    normalize_all,
    report_stem,
    write_reports,
)
from nnperturb.stats_core import DegenerateSampleError
from nnperturb.synthetic import make_chi_law, make_power_law, sample_order_stats


def model_samples(kt, kx, ell, count, seed):
    """DeltaSampleSet whose ell_hat is exactly ell and delta drawn from the limit law."""
    d = sample_asymptotic(AsymptoticDeltaModel(RankPair(kt, kx), LidIndex(ell)), seed, count)
    return DeltaSampleSet(np.arange(count), d, np.full(count, float(ell)), np.zeros(count, dtype=bool))


def json_round_trip(obj, cls):
    d = json.loads(json.dumps(obj.to_dict()))
    assert cls.from_dict(d).to_dict() == obj.to_dict()


def test_measure_all_drops_degenerate():
    profiles = [
        NeighborProfile("a", [1.0, 2.0, 4.0]),
        NeighborProfile("b", [3.0, 3.0, 3.0]),
        NeighborProfile("c", [0.5, 1.0, 1.5]),
    ]
    out = measure_all(profiles, RankPair(1, 3))
    assert len(out) == 2
    assert out.degenerate == 1
    assert list(out.query_ids) == ["a", "c"]
    assert out.delta[0] == pytest.approx(0.75)


def test_measure_all_empty():
    out = measure_all([], RankPair(1, 3))
    assert len(out) == 0 and out.input_count == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from([0.0, 1.0, 2.0, 3.0, 5.0]), min_size=2, max_size=6), max_size=30))
def test_bookkeeping_reconciles(rows):
    profiles = [NeighborProfile(i, sorted(r)) for i, r in enumerate(rows)]
    out = measure_all(profiles, RankPair(2, 4))
    assert out.kept + out.tie_flagged + out.dropped == len(profiles)
    t = out.tallies()
    assert t["input"] == len(profiles)
    assert np.all(out.delta[~out.tie] > 0) and np.all(out.delta < 1)


def test_measure_array_matches_profile_path():
    rows = sample_order_stats(make_power_law(6), 10**5, 50, 0, 200)
    r = RankPair(5, 50)
    a = measure_array(rows, r)
    b = measure_all([NeighborProfile(i, row) for i, row in enumerate(rows)], r)
    np.testing.assert_array_equal(a.delta, b.delta)
    np.testing.assert_array_equal(a.ell_hat, b.ell_hat)


def test_iteration_yields_delta_samples():
    s = measure_all([NeighborProfile(3, [1.0, 2.0, 2.0])], RankPair(2, 3))
    (sample,) = list(s)
    assert sample.tie and sample.query_id == 3


def test_normalize_all_values():
    s = DeltaSampleSet(np.arange(3), np.array([0.5, 0.37, 0.0]), np.array([5.0, 10.0, 4.0]),
                       np.array([False, False, True]))
    out = normalize_all(s, 10)
    assert out.shape == (2,)
    assert out[0] == pytest.approx(0.2928932188134524)
    assert out[1] == pytest.approx(0.37)


def test_normalized_mixture_fits_single_model():
    parts = [model_samples(1, 100, ell, 25_000, i) for i, ell in enumerate((3, 5, 20, 50))]
    pooled = normalize_all(DeltaSampleSet.concat(parts), 10)
    rep = compare_to_theory(pooled, RankPair(1, 100), 10)
    assert rep.ks < 0.01


def test_compare_self_consistency_and_markers():
    s = model_samples(10, 100, 10, 50_000, 7)
    rep = compare_to_theory(s.delta, RankPair(10, 100), 10)
    assert rep.ks < rep.ks_band == pytest.approx(1.63 / math.sqrt(50_000))
    assert rep.grid.size == 512 and rep.empirical.shape == rep.theoretical.shape
    step = rep.grid[1] - rep.grid[0]
    assert abs(rep.grid[np.argmax(rep.theoretical)] - rep.markers["mode"]["value"]) <= step
    assert rep.empirical_density.integral() == pytest.approx(1.0, abs=0.01)
    json_round_trip(rep, ComparisonReport)


def test_compare_needs_samples():
    with pytest.raises(DegenerateSampleError):
        compare_to_theory(np.full(50, 0.2), RankPair(1, 10), 10)


def test_joint_compare_factored_model():
    rng = np.random.default_rng(8)
    ranks = RankPair(10, 100)
    ell = rng.uniform(8, 12, 20_000)
    b = rng.beta(10, 90, ell.size)
    delta = -np.expm1(np.log(b) / ell)
    rep = joint_compare(ell, delta, ranks)
    assert rep.empirical.shape == rep.model.shape == (rep.grid_ell.size, rep.grid_delta.size)
    assert rep.l1 < 0.1
    marg = np.trapezoid(rep.model, rep.grid_delta, axis=1)
    assert np.max(np.abs(marg - rep.ell_marginal)) < 0.05
    json_round_trip(rep, JointReport)


def test_joint_compare_needs_samples():
    with pytest.raises(DegenerateSampleError):
        joint_compare(np.full(500, 10.0), np.full(500, 0.2), RankPair(1, 10))


def test_convergence_power_law_is_flat():
    t = convergence_study(make_power_law(5), RankPair(2, 4), [100, 1000, 10000], 40_000, 0)
    assert max(t.ks) < 1.63 / math.sqrt(40_000)
    json_round_trip(t, ConvergenceTable)


def test_convergence_chi_decreases():
    t = convergence_study(make_chi_law(5), RankPair(2, 4), [100, 1000, 10000, 100000], 20_000, 1)
    assert t.slope < 0
    assert t.ks[-1] < t.ks[0] - 0.005


@pytest.mark.parametrize("kw", [{"replicates": 0}, {"n_values": [1000, 100]}, {"n_values": [3]}])
def test_convergence_rejects_bad_input(kw):
    args = {"law": make_power_law(2), "ranks": RankPair(2, 4), "n_values": [100], "replicates": 10, "rng": 0}
    args.update(kw)
    with pytest.raises(ValueError):
        convergence_study(**args)


def test_binned_single_lid():
    s = model_samples(1, 100, 12, 20_000, 3)
    t = binned_ks_study(s, RankPair(1, 100), 10, 5)
    assert [r["bin"] for r in t.rows] == [2]
    assert t.rows[0]["ks"] < 1.63 / math.sqrt(20_000)
    json_round_trip(t, BinnedKsTable)


def test_binned_flags_small_bins_and_partitions():
    s = DeltaSampleSet.concat([model_samples(1, 100, 12, 500, 1), model_samples(1, 100, 31, 10, 2)])
    t = binned_ks_study(s, RankPair(1, 100), 10, 5)
    assert sum(r["count"] for r in t.rows) == 510
    small = [r for r in t.rows if r["insufficient"]]
    assert len(small) == 1 and small[0]["ks"] is None and small[0]["bin"] == 6


def test_analyze_writes_named_reports(tmp_path):
    rows = sample_order_stats(make_power_law(10), 10**6, 100, 4, 3000)
    ranks = RankPair(1, 100)
    s = measure_array(rows, ranks)
    res = analyze(s, ranks, 10, dataset="toy")
    assert res.comparison.counts["input"] == 3000
    files = write_reports(res, tmp_path, "toy", ranks, 10)
    stem = report_stem("toy", ranks, 10)
    assert stem == "toy_kt1_kx100_l010"
    names = sorted(os.path.basename(f) for f in files)
    assert f"{stem}_comparison.json" in names and f"{stem}_joint.csv" in names
    with open(tmp_path / f"{stem}_comparison.json") as f:
        back = ComparisonReport.from_dict(json.load(f))
    assert back.to_dict() == json.loads(json.dumps(res.comparison.to_dict()))
