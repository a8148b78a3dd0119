import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dro_path.ambiguity import validate
from dro_path.datagen import (ExperimentConfig, NominalModel, arc_rng, beta_parameters, build_ambiguity,
                              draw_subintervals, example1_nominal, gen_layered, gen_nominal,
                              relative_expected_loss, sample_costs)
from dro_path.graph import enumerate_paths


@given(st.integers(1, 6), st.integers(1, 5))
def test_layered_graph_shape(v, r):
    g = gen_layered(v, r)
    assert g.node_count == v * r + 2
    assert g.arc_count == 2 * r + (v - 1) * r * r
    assert g.is_acyclic
    assert all(g.tails[a] < g.heads[a] for a in range(g.arc_count))
    assert list(g.arcs()) == sorted(g.arcs())
    if v * r <= 9:
        assert len(enumerate_paths(g, 0, g.node_count - 1)) == r ** v


def test_default_scale_has_1920_arcs():
    assert gen_layered(20, 10).arc_count == 1920


@given(st.floats(0.02, 0.98), st.floats(0.001, 0.01))
def test_beta_parameters_hit_mean_and_variance(m, var):
    if var >= m * (1 - m):
        return
    a, b = beta_parameters(m, var)
    assert stats.beta.mean(a, b) == pytest.approx(m)
    assert stats.beta.var(a, b) == pytest.approx(var)


def test_nominal_model_is_seeded_and_valid():
    g = gen_layered(3, 3)
    m1, m2 = gen_nominal(g, 5), gen_nominal(g, 5)
    assert np.array_equal(m1.lower, m2.lower) and np.array_equal(m1.alpha, m2.alpha)
    assert not np.array_equal(m1.lower, gen_nominal(g, 6).lower)
    assert np.all(m1.lower >= 0) and np.all(m1.upper <= m1.lower + 100)
    assert np.all(m1.alpha > 0) and np.all(m1.beta > 0)
    back = NominalModel.from_dict(json.loads(json.dumps(m1.to_dict())))
    assert np.array_equal(back.mean, m1.mean)


def test_arc_streams_are_independent_of_graph_size():
    big = gen_nominal(gen_layered(3, 3), 3)
    small = NominalModel(big.lower[:4], big.upper[:4], big.alpha[:4], big.beta[:4])
    assert np.array_equal(gen_nominal(gen_layered(1, 2), 3).lower, big.lower[:4])
    assert np.array_equal(sample_costs(small, 5, 11), sample_costs(big, 5, 11)[:, :4])
    x = arc_rng(1, 2, 3).uniform(size=4)
    assert np.array_equal(x, arc_rng(1, 2, 3).uniform(size=4))
    assert not np.array_equal(x, arc_rng(1, 2, 4).uniform(size=4))


def test_samples_stay_in_support_and_match_mean():
    g = gen_layered(2, 3)
    model = gen_nominal(g, 1)
    x = sample_costs(model, 4000, 2)
    assert x.shape == (4000, g.arc_count)
    assert np.all(x >= model.lower) and np.all(x <= model.upper)
    se = (model.upper - model.lower) * np.sqrt(model.sigma_tilde / 4000)
    assert np.all(np.abs(x.mean(axis=0) - model.mean) < 5 * se)


def test_mixture_mean():
    model = example1_nominal()
    assert model.mean.tolist() == pytest.approx([0.95 * 35 + 0.05 * 85, 51, 50, 50, 50])
    x = sample_costs(model, 20000, 0)
    assert x[:, 0].mean() == pytest.approx(model.mean[0], abs=1.0)
    assert np.mean(x[:, 0] > 70) == pytest.approx(0.05, abs=0.01)


@given(st.floats(0, 50), st.floats(1, 100), st.integers(0, 6), st.floats(0.05, 0.95), st.integers(0, 99))
def test_subintervals_have_the_requested_width(lower, width, n1, kappa, seed):
    upper = lower + width
    subs = draw_subintervals(lower, upper, n1, kappa, arc_rng(seed, 3, 0))
    assert len(subs) == n1
    for a, b in subs:
        assert lower <= a <= b <= upper
        assert b - a == pytest.approx(kappa * width)


def test_config_validation_and_roundtrip(tmp_path):
    cfg = ExperimentConfig(v=3, r=2, gamma_list=[0, 2])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg
    for bad in ({"kappa": 1.0}, {"eta0": 0.0}, {"n1": -1}, {"v": 0}, {"gamma_list": (-1,)}):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"v": 2, "colour": "red"})


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.integers(1, 4), st.booleans())
def test_built_ambiguity_is_valid_and_budgeted(seed, n1, expectations):
    g = gen_layered(2, 3)
    model = gen_nominal(g, seed)
    cfg = ExperimentConfig(v=2, r=3, n0=60, n1=n1, seed=seed, use_expectation=expectations)
    x = sample_costs(model, cfg.n0, seed)
    amb, info = build_ambiguity(g, model, x, cfg, return_info=True)
    for a in amb.per_arc:
        validate(a)
        assert len(a.baselines) == n1
    if expectations:
        assert len(amb.expectation_rows) == 2 * len(info.near_optimal)
        assert info.statements >= n1 * g.arc_count + len(info.near_optimal)
        # true means satisfy the rows with overwhelming probability
        assert np.all(amb.B @ model.mean <= amb.b + 1e-9)
    else:
        assert not amb.expectation_rows
    assert info.eta == pytest.approx(cfg.eta0 / info.statements)


def test_relative_loss_is_one_on_the_best_path():
    g = gen_layered(2, 2)
    model = gen_nominal(g, 0)
    paths = enumerate_paths(g, 0, g.node_count - 1)
    losses = [relative_expected_loss(p, model, g) for p in paths]
    assert min(losses) == pytest.approx(1.0)
    assert all(x >= 1.0 for x in losses)
