import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from dro_path.ambiguity import (AmbiguitySet, ArcAmbiguity, ExpectationConstraint, QuantileConstraint,
                                bonferroni_eta, elementary_partition, expectation_from_samples,
                                hoeffding_radius, quantile_from_samples, repair, validate)
from dro_path.errors import A1Infeasible, A2Violation, SampleOutOfSupport


@st.composite
def arc_ambiguities(draw, max_baselines=6):
    lower = draw(st.integers(0, 50))
    upper = lower + draw(st.integers(0, 60))
    k = draw(st.integers(0, max_baselines))
    qs = []
    for _ in range(k):
        a = draw(st.integers(lower, upper))
        b = draw(st.integers(a, upper))
        if (a, b) == (lower, upper):
            continue
        p = draw(st.floats(0, 1))
        w = draw(st.floats(0, 1))
        qs.append(QuantileConstraint(a, b, p * (1 - w), p + (1 - p) * w))
    return ArcAmbiguity.build(lower, upper, qs)


def test_partition_of_the_worked_example():
    amb = ArcAmbiguity.build(0, 100, [QuantileConstraint(20, 60, 0.1, 0.9),
                                      QuantileConstraint(30, 70, 0.1, 0.9)])
    part = elementary_partition(amb)
    assert part.bounds == ((0, 20), (20, 30), (30, 60), (60, 70), (70, 100))
    assert part.baseline_to_elementary == ((0, 1, 2, 3, 4), (1, 2), (2, 3))
    assert part.elementary_to_baseline == ((0,), (0, 1), (0, 1, 2), (0, 2), (0,))


@settings(max_examples=1000)
@given(arc_ambiguities())
def test_partition_size_and_membership(amb):
    part = elementary_partition(amb)
    D = len(amb.quantiles)
    assert part.size <= 2 * D - 1
    assert part.bounds[0][0] == amb.lower and part.bounds[-1][1] == amb.upper
    for (a, b), (c, d) in zip(part.bounds, part.bounds[1:]):
        assert a <= b and b <= c
    M = part.membership()
    for i, q in enumerate(amb.quantiles):
        inside = {j for j, (a, b) in enumerate(part.bounds) if q.lo <= a and b <= q.hi}
        assert set(part.baseline_to_elementary[i]) == inside
        assert M[i].sum() == len(inside)
    assert M.T.tolist() == [[i in js for i in range(D)] for js in part.elementary_to_baseline]


def test_touching_intervals_are_rejected_with_the_endpoint():
    amb = ArcAmbiguity.build(0, 100, [QuantileConstraint(0, 50, 0.2, 0.8),
                                      QuantileConstraint(50, 100, 0.2, 0.8)])
    with pytest.raises(A2Violation) as err:
        validate(amb, arc=3)
    assert err.value.endpoints == [50.0]
    assert "50" in str(err.value) and "arc 3" in str(err.value)


def test_support_endpoint_clash_is_rejected():
    amb = ArcAmbiguity.build(10, 100, [QuantileConstraint(100, 100, 0.0, 0.5)])
    with pytest.raises(A2Violation):
        validate(amb)


@given(arc_ambiguities(max_baselines=4))
def test_repair_removes_every_clash(amb):
    assume(amb.upper > amb.lower)
    fixed = repair(amb)
    lo, hi = fixed.endpoints()
    eq = lo[:, None] == hi[None, :]
    np.fill_diagonal(eq, False)
    assert not eq.any()


def test_infeasible_and_boundary_quantiles_are_rejected():
    amb = ArcAmbiguity.build(0, 10, [QuantileConstraint(2, 4, 0.6, 1.0),
                                     QuantileConstraint(6, 8, 0.6, 1.0)])
    with pytest.raises(A1Infeasible):
        validate(amb)
    # feasible but only on the boundary of the probability ranges
    amb = ArcAmbiguity.build(0, 10, [QuantileConstraint(2, 4, 0.5, 1.0),
                                     QuantileConstraint(6, 8, 0.5, 1.0)])
    with pytest.raises(A1Infeasible):
        validate(amb)
    amb = ArcAmbiguity.build(0, 10, [QuantileConstraint(2, 4, 0.4, 1.0),
                                     QuantileConstraint(6, 8, 0.4, 1.0)])
    assert validate(amb).size == 5


def test_degenerate_constraint_is_accepted_as_equality():
    amb = ArcAmbiguity.build(0, 10, [QuantileConstraint(3, 5, 0.25, 0.25)])
    assert validate(amb).size == 3


def test_constructor_invariants():
    with pytest.raises(ValueError):
        QuantileConstraint(5, 4, 0, 1)
    with pytest.raises(ValueError):
        QuantileConstraint(1, 4, 0.6, 0.5)
    with pytest.raises(ValueError):
        ArcAmbiguity.build(0, 10, [QuantileConstraint(5, 11, 0, 1)])
    with pytest.raises(ValueError):
        ArcAmbiguity((0, 10), (QuantileConstraint(1, 2, 0, 1),))
    with pytest.raises(ValueError):
        ExpectationConstraint({0: 0.0}, 1.0)


def test_expectation_rows_are_sorted_and_merged():
    row = ExpectationConstraint([(3, 1.0), (1, 2.0), (3, 0.5)], 7)
    assert row.coefficients == ((1, 2.0), (3, 1.5))
    assert row.dense(5).tolist() == [0, 2, 0, 1.5, 0]


def test_json_roundtrip():
    per_arc = (ArcAmbiguity.build(0, 10, [QuantileConstraint(2, 6, 0.1, 0.7)]),
               ArcAmbiguity.build(1, 3))
    amb = AmbiguitySet(per_arc, (ExpectationConstraint({0: 1, 1: 1}, 9.5),))
    back = AmbiguitySet.from_dict(json.loads(json.dumps(amb.to_dict())))
    assert back == amb
    assert back.B.tolist() == [[1.0, 1.0]] and back.b.tolist() == [9.5]
    assert back.coupled_arcs == (0, 1)


def test_hoeffding_radius_closed_form():
    eps = hoeffding_radius(100, 0.05)
    assert 2 * math.exp(-2 * 100 * eps ** 2) == pytest.approx(0.05)
    assert hoeffding_radius(100, 0.05, width=20) == pytest.approx(20 * eps)


def test_quantile_interval_is_clipped():
    q = quantile_from_samples(0, 10, (1, 2), 0.05)
    assert q.q_lo == 0.0 and 0 < q.q_hi < 1
    q = quantile_from_samples(10, 10, (1, 2), 0.05)
    assert q.q_hi == 1.0


def test_expectation_rows_bracket_the_sample_mean():
    totals = np.array([10.0, 12.0, 14.0])
    up, down = expectation_from_samples(totals, [4, 2], 0.0, 30.0, 0.1)
    eps = hoeffding_radius(3, 0.1, 30.0)
    assert up.coefficients == ((2, 1.0), (4, 1.0)) and up.rhs == pytest.approx(12 + eps)
    assert down.coefficients == ((2, -1.0), (4, -1.0)) and down.rhs == pytest.approx(-(12 - eps))
    with pytest.raises(SampleOutOfSupport):
        expectation_from_samples([31.0], [0], 0.0, 30.0, 0.1)


def test_bonferroni_allocation():
    assert bonferroni_eta(0.05, 4, 10, 5) == pytest.approx(0.05 / 45)
    with pytest.raises(ValueError):
        bonferroni_eta(0.05, 0, 10, 0)


def test_quantile_interval_from_37_hits_in_100():
    q = quantile_from_samples(37, 100, (20.0, 60.0), 0.05)
    eps = 0.13581015157406195
    assert 2 * math.exp(-2 * 100 * eps ** 2) == pytest.approx(0.05, rel=1e-12)
    assert q.q_lo == pytest.approx(0.37 - eps, abs=1e-12)
    assert q.q_hi == pytest.approx(0.37 + eps, abs=1e-12)
