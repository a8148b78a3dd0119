import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dro_path.ambiguity import ArcAmbiguity, QuantileConstraint
from dro_path.baselines import (BudgetParams, MomentEstimates, budgeted_path_cost, budgeted_robust_sp,
                                censored_moment_estimates, censored_upper_values,
                                concentration_radius, dr0_costs, dr0_solve, membership_flags)
from dro_path.datagen import example1_ambiguity, example1_graph
from dro_path.errors import UnresolvableSample
from dro_path.graph import shortest_path

from .oracles import brute_force_budget, moment_oracle, random_graph


@settings(max_examples=100)
@given(st.integers(0, 2 ** 31), st.integers(0, 3))
def test_threshold_method_matches_subset_enumeration(seed, gamma):
    g, rng = random_graph(seed)
    lower = rng.integers(0, 10, g.arc_count).astype(float)
    upper = lower + rng.integers(0, 10, g.arc_count)
    t = g.node_count - 1
    path, value = budgeted_robust_sp(g, lower, upper, gamma, 0, t)
    assert value == pytest.approx(brute_force_budget(g, lower, upper, gamma, 0, t), abs=1e-9)
    assert budgeted_path_cost(path, lower, upper, gamma) == pytest.approx(value)
    assert path.is_valid(g, 0, t)


@settings(max_examples=100)
@given(st.integers(0, 2 ** 31))
def test_budget_extremes_are_plain_shortest_paths(seed):
    g, rng = random_graph(seed)
    lower = rng.integers(0, 10, g.arc_count).astype(float)
    upper = lower + rng.integers(0, 10, g.arc_count)
    t = g.node_count - 1
    assert budgeted_robust_sp(g, lower, upper, 0, 0, t) == shortest_path(g, lower, 0, t)
    assert budgeted_robust_sp(g, lower, upper, g.arc_count, 0, t) == shortest_path(g, upper, 0, t)


def test_example1_budgets():
    g, s, t = example1_graph()
    amb = example1_ambiguity()
    path, value = budgeted_robust_sp(g, amb.lower, amb.upper, 5, s, t)
    assert value == 200.0 and path.arc_ids == (2, 4)
    path, value = budgeted_robust_sp(g, amb.lower, amb.upper, 0, s, t)
    assert value == 0.0 and path.arc_ids == (0, 3, 4)


def test_budget_params():
    assert BudgetParams(7).clipped(5) == 5
    with pytest.raises(ValueError):
        BudgetParams(-1)
    with pytest.raises(ValueError):
        BudgetParams(1.5)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 100), st.floats(0, 80), st.floats(0, 1)),
                min_size=1, max_size=8))
def test_dr0_costs_are_the_moment_bound(arcs):
    lower = np.array([a[0] for a in arcs])
    upper = lower + np.array([a[1] for a in arcs])
    # keep the moment ball reachable from the support
    mu = np.maximum(np.array([a[2] for a in arcs]), lower)
    second = np.maximum(mu ** 2 * (1 + np.array([a[3] for a in arcs])), lower ** 2)
    est = MomentEstimates(mu, second, np.zeros(len(arcs)))
    costs = dr0_costs(upper, est, lower)
    t = est.truncated(upper)
    assert costs == pytest.approx(np.maximum(np.minimum(t.mu_hat, np.sqrt(t.sigma2_hat)), lower))
    for a in range(len(arcs)):
        assert costs[a] == pytest.approx(moment_oracle(lower[a], upper[a], mu[a], second[a]),
                                         rel=1e-7, abs=1e-7)


def test_dr0_solve_uses_the_moment_costs():
    g, s, t = example1_graph()
    amb = example1_ambiguity()
    est = MomentEstimates([50, 90, 100, 10, 10], [2500, 900, 10000, 100, 400], np.zeros(5))
    path, value, costs = dr0_solve(g, (amb.lower, amb.upper), est, s, t)
    assert costs.tolist() == pytest.approx([50, 30, 100, 10, 10])
    assert path.arc_ids == (0, 3, 4) and value == pytest.approx(70.0)


def censor_fixture():
    return ArcAmbiguity.build(0, 100, [QuantileConstraint(0, 70, 0.8, 1.0),
                                       QuantileConstraint(40, 90, 0.1, 0.9)])


def test_censored_values_take_the_largest_consistent_cost():
    amb = censor_fixture()
    values = np.array([10.0, 50.0, 80.0, 95.0])
    flags = membership_flags(values, amb)
    assert flags.tolist() == [[True, True, False], [True, True, True],
                              [True, False, True], [True, False, False]]
    # [0,40) -> 40 is the start of the missed interval; [40,70] -> 70; (70,90] -> 90; (90,100] -> 100
    assert censored_upper_values(flags, amb).tolist() == [40.0, 70.0, 90.0, 100.0]
    example = example1_ambiguity().per_arc[0]
    flags = membership_flags(np.array([30.0]), example)
    assert censored_upper_values(flags, example).tolist() == [70.0]


def test_impossible_flag_pattern_is_rejected():
    amb = censor_fixture()
    with pytest.raises(UnresolvableSample):
        censored_upper_values(np.array([[False, True, True]]), amb)


@given(st.integers(1, 500), st.floats(0.001, 0.5), st.integers(1, 50),
       st.lists(st.floats(0.5, 200), min_size=1, max_size=6))
def test_concentration_radius_solves_its_equation(r, eta0, arcs, xi):
    eps = concentration_radius(xi, r, eta0, arcs)
    scale = len(xi) * np.array(xi)
    total = 2 * arcs * np.exp(-2 * r * (eps / scale) ** 2).sum()
    assert total == pytest.approx(eta0, rel=1e-8)


def test_censored_estimates_are_truncated_to_the_support():
    amb = censor_fixture()
    rng = np.random.default_rng(0)
    values = rng.uniform(0, 100, 50)
    flags = membership_flags(values, amb)
    est = censored_moment_estimates([flags], [amb], 0.05, arc_count=1)
    xi = censored_upper_values(flags, amb)
    assert est.mu_hat[0] == pytest.approx(min(xi.mean() + est.eps[0], 100.0))
    assert est.sigma2_hat[0] == pytest.approx(min((xi ** 2).mean() + est.eps_sigma2[0], 1e4))
    assert est.mu_hat[0] >= values.mean()
