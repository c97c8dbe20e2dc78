import numpy as np
import pytest

from nettsp.errors import BudgetExceeded
from nettsp.lightdp import (auto_portals, choose_portals, draw_radius_samples,
                            make_flat_tree, solve_light_tour,
                            solve_with_radius_guessing, tree_from_samples)
from nettsp.metric import estimate_doubling, from_points, normalize
from nettsp.nets import build_hierarchy
from nettsp.oracles import brute_force_tsp, held_karp_tsp
from nettsp.partition import hierarchical_clustering
from nettsp.tours import edges_weight, mst, tour_weight


def rand_space(seed, n):
    return normalize(from_points(np.random.default_rng(seed).random((n, 2))))


def all_points_chooser(space):
    return lambda members, level: list(range(space.n))


# ---------------------------------------------------------------- portals

def test_choose_portals_requires_power_of_s():
    sp = rand_space(0, 20)
    h = build_hierarchy(sp, 6.0)
    with pytest.raises(ValueError):
        choose_portals(sp, h, range(5), 1, 10.0)
    with pytest.raises(ValueError):
        choose_portals(sp, h, range(5), 1, 1.0)


def test_choose_portals_fine_pitch_is_members():
    sp = rand_space(1, 25)
    h = build_hierarchy(sp, 6.0)
    members = tuple(range(6))
    ps = choose_portals(sp, h, members, 0, 36.0)  # pitch 1/36 < min distance
    assert ps.portals == members
    assert all(ps.mandatory)


def test_choose_portals_singleton_cluster():
    sp = rand_space(2, 25)
    h = build_hierarchy(sp, 6.0)
    ps = choose_portals(sp, h, (4,), min(1, h.top), 6.0)
    assert len(ps.portals) >= 1


def test_choose_portals_level_matches_brute_force():
    sp = rand_space(3, 150)
    h = build_hierarchy(sp, 6.0)
    assert h.top >= 3
    dd = estimate_doubling(sp, seed=3).ddim_upper
    center = 0
    row = sp.row(center)
    members = tuple(int(p) for p in np.flatnonzero(row <= 6.0 ** 3 / 2))[:50]
    ps = choose_portals(sp, h, members, 3, 36.0)
    j = 3 - 2
    pitch = 6.0 ** j
    expected = [int(p) for p in h.net(j)
                if min(sp.dist(int(p), m) for m in members) <= pitch * (1 + 1e-9)]
    assert list(ps.portals) == expected
    assert len(ps.portals) <= (8 * 36.0) ** dd


def test_auto_portals_nested_in_cap():
    sp = rand_space(4, 80)
    h = build_hierarchy(sp, 6.0)
    members = tuple(range(0, 30))
    small = auto_portals(sp, h, members, min(2, h.top), 4)
    big = auto_portals(sp, h, members, min(2, h.top), 12)
    assert set(small.portals) <= set(big.portals)
    # every member within the chosen pitch of some portal
    for m in members:
        assert min(sp.dist(m, p) for p in small.portals) <= small.pitch * (1 + 1e-9)


# --------------------------------------------------------------- solve DP

def test_solve_single_point():
    sp = from_points([(0.0, 0.0)])
    tree = make_flat_tree(sp)
    h = build_hierarchy(sp, 6.0)
    res = solve_light_tour(sp, h, tree, 2, 2)
    assert res.tour.seq == (0,)
    assert res.cost == pytest.approx(0.0)


def test_solve_two_points_exact():
    sp = normalize(from_points([(0.0, 0.0), (0.7, 0.0)]))
    h = build_hierarchy(sp, 6.0)
    tree = make_flat_tree(sp)
    res = solve_light_tour(sp, h, tree, 2, 4)
    assert res.cost == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(10))
def test_flat_tree_equals_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    sp = rand_space(seed + 10, n)
    h = build_hierarchy(sp, 6.0)
    tree = make_flat_tree(sp)
    res = solve_light_tour(sp, h, tree, n, 2 * n,
                           portal_chooser=all_points_chooser(sp))
    assert res.cost == pytest.approx(brute_force_tsp(sp).weight, abs=1e-9)
    assert tour_weight(sp, res.tour) <= res.cost + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_hierarchical_solve_valid_and_bounded(seed):
    rng = np.random.default_rng(seed + 40)
    n = int(rng.integers(8, 17))
    sp = rand_space(seed + 50, n)
    h = build_hierarchy(sp, 6.0)
    tree = hierarchical_clustering(sp, h, 2.5, np.random.default_rng(seed))
    res = solve_light_tour(sp, h, tree, 6, 2)
    w = tour_weight(sp, res.tour)
    assert res.tour.closed
    assert res.tour.visits() == set(range(n)) and len(res.tour.seq) == n
    assert w <= res.cost + 1e-9
    assert w >= held_karp_tsp(sp).weight - 1e-9
    assert w <= 2 * edges_weight(sp, mst(sp, range(n))) + 1e-9


def test_audit_instances_within_r_and_portals():
    sp = rand_space(60, 14)
    h = build_hierarchy(sp, 6.0)
    tree = hierarchical_clustering(sp, h, 2.5, np.random.default_rng(0))
    res = solve_light_tour(sp, h, tree, 6, 2)
    assert res.audit
    for level, size, instances, within in res.audit:
        assert instances <= 2
        assert within


def test_monotone_in_m_cap():
    sp = rand_space(61, 12)
    h = build_hierarchy(sp, 6.0)
    tree = hierarchical_clustering(sp, h, 2.5, np.random.default_rng(1))
    c3 = solve_light_tour(sp, h, tree, 3, 2).cost
    c8 = solve_light_tour(sp, h, tree, 8, 2).cost
    assert c8 <= c3 + 1e-9


@pytest.mark.parametrize("seed", [1, 5])
def test_monotone_in_r(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 8))
    sp = rand_space(seed + 70, n)
    h = build_hierarchy(sp, 6.0)
    tree = hierarchical_clustering(sp, h, 2.5, np.random.default_rng(seed))
    res2 = solve_light_tour(sp, h, tree, 3, 2)
    res4 = solve_light_tour(sp, h, tree, 3, 4, budget=30_000_000)
    assert res4.cost <= res2.cost + 1e-9
    assert tour_weight(sp, res4.tour) >= held_karp_tsp(sp).weight - 1e-9


def test_budget_exceeded_raises():
    sp = rand_space(62, 14)
    h = build_hierarchy(sp, 6.0)
    tree = hierarchical_clustering(sp, h, 2.5, np.random.default_rng(2))
    with pytest.raises(BudgetExceeded):
        solve_light_tour(sp, h, tree, 6, 2, budget=10)


# ---------------------------------------------------------- radius guesses

def test_guessing_g1_matches_induced_tree():
    for seed in range(4):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 13))
        sp = rand_space(seed + 80, n)
        h = build_hierarchy(sp, 6.0)
        res_g = solve_with_radius_guessing(sp, h, 1, 6, 2, 2.5,
                                           np.random.default_rng(seed + 5))
        samples = draw_radius_samples(sp, h, 1, 2.5, np.random.default_rng(seed + 5))
        tree = tree_from_samples(sp, h, samples)
        res_t = solve_light_tour(sp, h, tree, 6, 2)
        assert res_g.cost == pytest.approx(res_t.cost, abs=1e-9)
        assert res_g.tour.seq == res_t.tour.seq


def test_guessing_two_points_exact():
    sp = normalize(from_points([(0.0, 0.0), (0.4, 0.3)]))
    h = build_hierarchy(sp, 6.0)
    res = solve_with_radius_guessing(sp, h, 3, 4, 2, 1.0, np.random.default_rng(0))
    assert res.cost == pytest.approx(2.0 * sp.dist(0, 1))


@pytest.mark.parametrize("seed", [0, 3])
def test_guessing_more_options_never_hurt(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 11))
    sp = rand_space(seed + 90, n)
    h = build_hierarchy(sp, 6.0)
    samples3 = draw_radius_samples(sp, h, 3, 2.5, np.random.default_rng(seed + 77))
    base = solve_light_tour(sp, h, tree_from_samples(sp, h, samples3), 6, 2)
    res3 = solve_with_radius_guessing(sp, h, 3, 6, 2, 2.5,
                                      np.random.default_rng(seed + 77))
    assert res3.cost <= base.cost + 1e-9
    assert tour_weight(sp, res3.tour) >= held_karp_tsp(sp).weight - 1e-9
