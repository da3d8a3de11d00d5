import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from elimns import analysis, auction, environments as env

D1 = auction.hard_pair(F(1, 10), +1)
D2 = auction.hard_pair(F(1, 10), -1)
PAIR_GRID = auction.PriceGrid((0.5, 0.75))


def test_switch_counts():
    assert analysis.count_switchings(env.build_switching([(500, D1), (500, D2)])) == 2
    assert analysis.count_switchings(env.build_switching([(1000, D1)])) == 1
    s = env.build_switching([(100, D1), (100, D2), (100, D1)], grid=PAIR_GRID)
    assert s.metadata["S"] == 3 and s.change_points() == [101, 201]


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        env.build_switching([(10, D1)], T=11)
    with pytest.raises(ValueError):
        env.build_bandit([(0, [0.5])])


def test_segment_lookup():
    s = env.build_bandit([(3, [0.1, 0.2]), (4, [0.3, 0.4])])
    assert s.payload_at(3).means == (0.1, 0.2)
    assert s.payload_at(4).means == (0.3, 0.4)
    with pytest.raises(ValueError):
        s.payload_at(8)
    assert s.mean_matrix().shape == (7, 2)


def test_drifting_zero_budget_is_constant():
    s = env.build_drifting(D1, D2, 50, 0.0, grid=PAIR_GRID)
    assert len(s.segments) == 1 and s.payload_at(50) == D1


def test_drifting_full_budget_reaches_end():
    s = env.build_drifting(D1, D2, 40, 1.0, grid=PAIR_GRID)
    assert s.payload_at(40) == D2
    assert s.metadata["final_weight"] == 1.0
    assert s.metadata["V_bar"] == pytest.approx(0.2, abs=1e-12)


def test_drifting_clamps_at_budget():
    s = env.build_drifting(D1, D2, 101, 0.1, grid=PAIR_GRID)
    assert s.metadata["final_weight"] == pytest.approx(0.5)
    assert s.metadata["V_bar"] == pytest.approx(0.1, abs=1e-12)


def test_drifting_needs_common_support():
    with pytest.raises(ValueError):
        env.build_drifting(D1, auction.point_mass((1, 1)), 10, 1.0)


def test_lower_bound_switching_signs_and_best():
    s = env.build_lower_bound_switching(6, 600, 0.25, rng=np.random.default_rng(4))
    md = s.metadata
    assert len(md["signs"]) == 6
    assert md["segment_best"] == [1 if x > 0 else 2 for x in md["signs"]]
    for (start, _, arm), seg_best in zip(s.best_arms(), md["segment_best"]):
        assert arm == seg_best
    with pytest.raises(ValueError):
        env.build_lower_bound_switching(601, 600)


def test_lower_bound_stationary_case():
    s = env.build_lower_bound_switching(1, 400)
    assert len(s.segments) == 1


def test_lower_bound_dynamic_shape_and_variation():
    s = env.build_lower_bound_dynamic(8, 8000, 0.25, rng=np.random.default_rng(0))
    md = s.metadata
    assert md["segment_length"] == 100 and md["segments"] == 80
    flips = sum(1 for a, b in zip(md["signs"], md["signs"][1:]) if a != b)
    per_flip = analysis.tv_distance(auction.hard_pair(md["eps"], 1), auction.hard_pair(md["eps"], -1))
    assert md["V_bar"] == pytest.approx(flips * per_flip, abs=1e-9)
    assert per_flip == pytest.approx(4 * md["eps"] * 0.5, abs=1e-12)


def test_lower_bound_dynamic_degenerate_and_warning():
    with pytest.warns(UserWarning):
        s = env.build_lower_bound_dynamic(0.1, 100)
    assert len(s.segments) == 1 and s.metadata["segment_length"] == 100


def test_sample_round():
    rng = np.random.default_rng(0)
    pm = env.build_switching([(5, auction.point_mass((0.3, 0.9)))], grid=PAIR_GRID)
    assert all(env.sample_round(pm, t, rng) == (0.3, 0.9) for t in range(1, 6))
    det = env.build_bandit([(5, [0.2, 0.6])], "deterministic")
    assert env.sample_round(det, 2, rng).tolist() == [0.2, 0.6]
    ber = env.build_bandit([(5, [0.0, 1.0])])
    assert env.sample_round(ber, 1, rng).tolist() == [0.0, 1.0]
    with pytest.raises(ValueError):
        env.sample_round(det, 6, rng)


def test_bandit_view_means_and_reveal():
    s = env.build_switching([(10, D1), (10, D2)], grid=auction.PriceGrid((F(1, 2), F(3, 4))))
    view = env.bandit_view(s)
    assert view.schedule.segment_means() == [[0.54, 0.48], [0.59, 0.63]]
    v = view.draw(15, np.random.default_rng(0))
    assert view.reveal(v, 2).tolist() == view.full_rewards(v)[1:].tolist()


def test_point_mass_view_is_deterministic():
    s = env.build_switching([(5, auction.point_mass((0.6, 0.2)))], grid=auction.discretize_prices(16))
    view = env.bandit_view(s)
    rng = np.random.default_rng(0)
    m = view.schedule.segment_means()[0]
    assert view.full_rewards(view.draw(1, rng)).tolist() == m


def test_view_variation_at_most_twice_auction_variation():
    rng = np.random.default_rng(8)
    for _ in range(20):
        s = env.build_lower_bound_dynamic(4, 2000, 0.4, rng=rng, grid=auction.discretize_prices(2000))
        view = env.bandit_view(s)
        assert analysis.variation_bandit(view.schedule.segment_means()) <= 2 * float(analysis.variation_auction(s)) + 1e-9


def test_reported_stats_match_recomputation():
    s = env.build_lower_bound_switching(5, 1000, rng=np.random.default_rng(1), grid=auction.discretize_prices(1000))
    js = s.to_json()
    assert js["S"] == analysis.count_switchings([seg.payload for seg in s.segments])
    for start, end, arm in s.best_arms():
        means = auction.mean_vector(s.payload_at(start), s.grid)
        assert arm == int(np.argmax(means)) + 1


def test_schedule_is_fixed_by_seed():
    a = env.build_lower_bound_switching(8, 800, rng=np.random.default_rng(3))
    b = env.build_lower_bound_switching(8, 800, rng=np.random.default_rng(3))
    assert a.metadata["signs"] == b.metadata["signs"]
