import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from region_prove.engine import (
    Classification,
    EngineConfig,
    EngineTimeout,
    Heuristic,
    InvariantError,
    ReachableEstimate,
    RegionRecord,
    VerificationOutcome,
    audit_safe_regions,
    check_outcome,
    choose_split,
    classify_region,
    compute_reachable_set,
    region_seed,
    replay_samples,
    run_eprove,
)
from region_prove.fixtures import (
    constant_network,
    halfplane_network,
    random_mlp,
    sliver_network,
    toy_order_property,
    toy_two_output_network,
    unit_square_property,
)
from region_prove.geometry import Hyperrectangle, unit_box, volume
from region_prove.network import Network, augment, output_positive
from region_prove.oracle import region_violation_fraction
from region_prove.tolerance import ToleranceParams

FAST = ToleranceParams.for_sample_size(0.999, 0.95, 300)


def _est(points, values):
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    return ReachableEstimate(float(values.min()), float(values.max()), points, values)


def test_injected_fixture_sample():
    aug = augment(toy_two_output_network(), toy_order_property())
    est = compute_reachable_set(aug, unit_box(2), 2, points=[[1, 0], [0, 1]])
    assert est.lo == pytest.approx(5.0, abs=1e-12)
    assert est.hi == pytest.approx(8.0, abs=1e-12)
    assert classify_region(est) is Classification.SAFE


def test_reachable_constant_and_single_sample():
    aug = augment(constant_network(2.5), output_positive(unit_box(2)))
    est = compute_reachable_set(aug, unit_box(2), 50, seed=1)
    assert est.lo == est.hi == 2.5
    aug = augment(random_mlp(0), unit_square_property())
    est = compute_reachable_set(aug, unit_box(2), 1, seed=4)
    assert est.lo == est.hi == float(est.values[0])


def test_injected_points_shape_checked():
    aug = augment(toy_two_output_network(), toy_order_property())
    with pytest.raises(ValueError):
        compute_reachable_set(aug, unit_box(2), 1, points=[[1, 0, 0]])


@pytest.mark.parametrize(
    "lo,hi,kind",
    [(5, 8, Classification.SAFE), (-8, -5, Classification.UNSAFE), (-1, 1, Classification.UNKNOWN),
     (0, 3, Classification.SAFE), (-3, 0, Classification.UNKNOWN)],
)
def test_classify(lo, hi, kind):
    assert classify_region(_est([[0.0], [1.0]], [lo, hi])) is kind


def test_h1_median_of_safe_on_widest_side():
    region = Hyperrectangle([0, 0], [1, 0.5])
    pts = [[0.2, 0.1], [0.4, 0.2], [0.9, 0.3], [0.5, 0.4]]
    est = _est(pts, [1, 1, 1, -1])
    assert choose_split(region, est, "h1") == (0, 0.4)


def test_h2_uses_mean():
    region = Hyperrectangle([0, 0], [1, 0.5])
    est = _est([[0.2, 0.1], [0.4, 0.2], [0.9, 0.3], [0.5, 0.4]], [1, 1, 1, -1])
    dim, at = choose_split(region, est, "h2")
    assert dim == 0 and at == pytest.approx(0.5)


def test_h5_picks_band_dimension():
    # safe points fill the lower band x2 <= 0.3, violations above
    net = Network([[[0.0, -1.0]]], [[0.3]])
    aug = augment(net, output_positive(unit_box(2)))
    est = compute_reachable_set(aug, unit_box(2), 400, seed=7)
    dim, at = choose_split(unit_box(2), est, Heuristic.H5)
    assert dim == 1
    assert at == float(est.safe_points[:, 1].max())


def test_h5_mixed_labels_use_midpoint():
    # labels alternate along both axes, so no cut separates them
    pts = np.array([[0.1, 0.1], [0.3, 0.3], [0.6, 0.6], [0.8, 0.8], [0.9, 0.9]])
    est = _est(pts, [1, -1, 1, -1, 1])
    assert choose_split(Hyperrectangle([0, 0], [2, 1]), est, "h5") == (0, 1.0)


def test_split_clamped_by_beta():
    est = _est([[0.001, 0.5], [0.002, 0.5], [0.9, 0.5]], [1, 1, -1])
    dim, at = choose_split(Hyperrectangle([0, 0], [1, 0.5]), est, "h1", beta=0.1)
    assert (dim, at) == (0, 0.1)


def test_no_safe_samples_midpoint():
    est = _est([[0.1, 0.1], [0.7, 0.2]], [-1, -2])
    assert choose_split(Hyperrectangle([0, 0], [1, 2]), est, "h5") == (1, 1.0)


def test_choose_split_errors():
    est = _est([[0.1, 0.1], [0.7, 0.2]], [1, -2])
    with pytest.raises(ValueError):
        choose_split(Hyperrectangle([0, 0], [1, 0]), est, "h1")
    with pytest.raises(ValueError):
        choose_split(unit_box(2), est, "h3")  # random heuristics need an rng
    with pytest.raises(ValueError):
        choose_split(unit_box(2), est, "h9")


def test_region_seed_stable_and_distinct():
    assert region_seed(0, 1) == region_seed(0, 1)
    seeds = {region_seed(0, k) for k in range(1, 2000)} | {region_seed(1, 1)}
    assert len(seeds) == 2000


def test_constant_positive_is_one_safe_region():
    out = run_eprove(constant_network(1.0, d=3), output_positive(unit_box(3)))
    assert len(out.records) == 1 and out.records[0].kind == "safe"
    assert out.records[0].box == unit_box(3)
    assert out.safe_rate == 1.0


def test_constant_negative_is_one_unsafe_region():
    out = run_eprove(constant_network(-1.0), output_positive(unit_box(2)))
    assert [r.kind for r in out.records] == ["unsafe"]
    assert out.safe_rate == 0.0 and out.unsafe_rate == 1.0


def test_inconsistent_tolerance_refused():
    cfg = EngineConfig(tolerance=ToleranceParams(0.999, 0.995, 100, 10))
    with pytest.raises(ValueError):
        run_eprove(constant_network(1.0), output_positive(unit_box(2)), cfg)


def test_halfplane_partition():
    cfg = EngineConfig(tolerance=FAST, max_splits=10)
    out = run_eprove(halfplane_network(2, 0, 0.5), output_positive(unit_box(2)), cfg)
    check_outcome(out)
    assert 0.45 < out.safe_rate <= 0.5 + 1e-12
    for r in out.records:
        if r.kind == "safe":
            assert r.box.lower[0] >= 0.5 - 1e-12


@pytest.mark.parametrize("h", list(Heuristic))
def test_all_heuristics_partition(h):
    cfg = EngineConfig(tolerance=FAST, heuristic=h, max_splits=8, master_seed=3)
    out = run_eprove(random_mlp(5), unit_square_property(), cfg)
    check_outcome(out)
    assert out.heuristic is h
    assert 0.2 < out.safe_rate < 0.8


def test_thread_count_does_not_change_outcome():
    cfg = EngineConfig(tolerance=FAST, max_splits=9, master_seed=17)
    a = run_eprove(random_mlp(2), unit_square_property(), cfg, threads=1)
    b = run_eprove(random_mlp(2), unit_square_property(), cfg, threads=4)
    assert a.same_result(b)
    assert [r.node for r in a.records] == sorted(r.node for r in a.records)


def test_seed_changes_outcome():
    net = random_mlp(2)
    a = run_eprove(net, unit_square_property(), EngineConfig(tolerance=FAST, max_splits=8, master_seed=0))
    b = run_eprove(net, unit_square_property(), EngineConfig(tolerance=FAST, max_splits=8, master_seed=1))
    assert not a.same_result(b)


@pytest.mark.slow
def test_defaults_same_seed_identical_and_seeds_agree():
    net = random_mlp(1)
    a = run_eprove(net, unit_square_property(), EngineConfig(master_seed=0))
    b = run_eprove(net, unit_square_property(), EngineConfig(master_seed=0))
    c = run_eprove(net, unit_square_property(), EngineConfig(master_seed=9))
    assert a.same_result(b)
    assert abs(a.safe_rate - c.safe_rate) < 0.02


def test_replayed_samples_of_safe_regions_are_safe():
    cfg = EngineConfig(tolerance=FAST, max_splits=9, master_seed=4)
    out = run_eprove(random_mlp(8), unit_square_property(), cfg)
    aug = augment(random_mlp(8), unit_square_property())
    for r in out.records:
        vals = aug.evaluate_batch(replay_samples(r, FAST.n))
        assert float(vals.min()) == r.lo and float(vals.max()) == r.hi
        if r.kind == "safe":
            assert np.all(vals >= 0)


def test_midpoint_splits_keep_regions_bounded():
    cfg = EngineConfig(tolerance=FAST, max_splits=10, beta=0.5, heuristic="h1")
    out = run_eprove(random_mlp(4), unit_square_property(), cfg)
    for r in out.records:
        # every split halves one side, so each side is at least 2^-depth
        assert min(r.box.sides) >= 2.0 ** -r.depth - 1e-15
        assert volume(r.box) == pytest.approx(2.0 ** -r.depth, rel=1e-12)


def test_min_side_eps_stops_splitting():
    cfg = EngineConfig(tolerance=FAST, max_splits=18, min_side_eps=0.1, beta=0.5, heuristic="h1")
    out = run_eprove(halfplane_network(2, 0, 0.33), output_positive(unit_box(2)), cfg)
    assert all(min(r.box.sides) >= 0.05 for r in out.records)
    assert len(out.unknown) > 0


def test_max_splits_zero():
    cfg = EngineConfig(tolerance=FAST, max_splits=0)
    out = run_eprove(halfplane_network(), output_positive(unit_box(2)), cfg)
    assert [r.kind for r in out.records] == ["unknown"]


def test_deadline():
    with pytest.raises(EngineTimeout):
        run_eprove(random_mlp(0), unit_square_property(), EngineConfig(tolerance=FAST), deadline=0.0)


def test_check_outcome_detects_overlap_and_gap():
    base = run_eprove(constant_network(1.0), output_positive(unit_box(2)), EngineConfig(tolerance=FAST))
    rec = base.records[0]
    gap = RegionRecord("safe", Hyperrectangle([0, 0], [0.5, 1]), 1, 0, 2, 1.0, 1.0)
    bad = VerificationOutcome(base.domain, [gap], base.params, base.heuristic, 18, 0)
    with pytest.raises(InvariantError):
        check_outcome(bad)
    bad = VerificationOutcome(base.domain, [rec, gap], base.params, base.heuristic, 18, 0)
    with pytest.raises(InvariantError):
        check_outcome(bad)


def test_audit_fully_safe_is_zero():
    out = run_eprove(constant_network(1.0), output_positive(unit_box(2)))
    aug = augment(constant_network(1.0), output_positive(unit_box(2)))
    rep = audit_safe_regions(out, lambda b: region_violation_fraction(aug, b, 50))
    assert [f for _, f in rep.entries] == [0.0]
    assert rep.exceed_count == 0 and rep.threshold == pytest.approx(0.005)


def test_audit_flags_planted_sliver():
    # y* < 0 only on a strip of width 1e-4 around x0 = 0.5; sampling 300 points over
    # the full square misses the strip, so the region is (wrongly) classified safe
    net = sliver_network(0.5, 1e-4)
    prop = output_positive(unit_box(2))
    out = run_eprove(net, prop, EngineConfig(tolerance=FAST, max_splits=0))
    assert [r.kind for r in out.records] == ["safe"]
    aug = augment(net, prop)
    # audit on the safe region plus a thin window that contains the strip
    window = Hyperrectangle([0.499, 0], [0.501, 1])
    narrowed = VerificationOutcome(
        out.domain,
        out.records + [RegionRecord("safe", window, 1, 0, 99, 0.0, 0.0)],
        out.params, out.heuristic, 18, 0,
    )
    # an odd cell count puts a cell centre on x0 = 0.5
    rep = audit_safe_regions(narrowed, lambda b: region_violation_fraction(aug, b, 2001))
    fractions = [f for _, f in rep.entries]
    assert 0 < fractions[0] < 0.005
    assert fractions[1] == pytest.approx(0.05, abs=0.001)
    assert rep.exceed_count == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from(list(Heuristic)))
def test_partition_invariants_random(seed, d, h):
    net = random_mlp(seed % 97, d=d, hidden=(6, 6))
    cfg = EngineConfig(tolerance=FAST, heuristic=h, max_splits=6, master_seed=seed)
    out = run_eprove(net, output_positive(unit_box(d)), cfg)
    check_outcome(out)
    assert out.safe_rate + out.unsafe_rate + out.unknown_rate == pytest.approx(1.0, abs=1e-9)
