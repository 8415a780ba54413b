import json
import math

import numpy as np
import pytest
from scipy.special import expit

from netscreen import FeatureSet, ValidationError
from netscreen.screening import discretize
from netscreen.simulate import (
    SimulationConfig, check_config, example_config, gen_network, gen_nlr,
    gen_nnb, generate, noise_rates, perturb_network,
)


def plain_config(**overrides):
    base = dict(name="t", model="nnb", n=60, p=3)
    base.update(overrides)
    return SimulationConfig(**base)


# ------------------------------------------------------------ determinism

def test_generate_is_deterministic():
    cfg = example_config(1, n=80, p=6)
    a, _ = generate(cfg, seed=5)
    b, _ = generate(cfg, seed=5)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.edges, b.edges)
    c, _ = generate(cfg, seed=6)
    assert not np.array_equal(a.edges, c.edges)


def test_tuple_seeds_open_distinct_streams():
    cfg = plain_config()
    a, _ = generate(cfg, seed=(3, 0))
    b, _ = generate(cfg, seed=(3, 1))
    assert not np.array_equal(a.x, b.x)


def test_column_draws_do_not_depend_on_p():
    """Column j is its own stream: adding more columns changes nothing."""
    narrow = example_config(1, n=50, p=4)
    wide = example_config(1, n=50, p=12)
    y1, x1, _ = gen_nnb(narrow, seed=(9,))
    y2, x2, _ = gen_nnb(wide, seed=(9,))
    assert np.array_equal(y1, y2)
    assert np.array_equal(x1, x2[:, :4])


# ------------------------------------------------------- sampling recipes

def test_conditional_recipe_frequencies():
    """Observed conditional rates sit within 3 standard errors."""
    cfg = example_config(1, n=4000, p=4)
    y, x, _ = gen_nnb(cfg, seed=(11,))
    # column 1 draws level 2 w.p. 0.2 when y=1 and 0.9 when y=2
    for resp, q in ((1, 0.2), (2, 0.9)):
        sel = y == resp
        rate = np.mean(x[sel, 0] == 2)
        se = math.sqrt(q * (1 - q) / sel.sum())
        assert abs(rate - q) < 3 * se, (resp, rate)
    # background columns are sparse bernoulli
    rate = np.mean(x[:, 3 - 1] == 2)  # column 3: level 2 w.p. 0.4 both ways
    assert abs(rate - 0.4) < 3 * math.sqrt(0.4 * 0.6 / 4000)


def test_logistic_response_rate():
    cfg = example_config(1, n=4000, p=4, model="nlr")
    y, x, _ = gen_nlr(cfg, seed=(12,))
    # x1=2, x2=1 drives the logit to -4
    sel = (x[:, 0] == 2) & (x[:, 1] == 1)
    want = expit(-4.0)
    assert want == pytest.approx(0.017986209962091555)
    rate = np.mean(y[sel] == 2)
    se = math.sqrt(want * (1 - want) / sel.sum())
    assert abs(rate - want) < 3 * se
    # and +4 on the opposite corner
    sel = (x[:, 0] == 1) & (x[:, 1] == 2)
    rate = np.mean(y[sel] == 2)
    want = expit(4.0)
    assert abs(rate - want) < 3 * math.sqrt(want * (1 - want) / sel.sum())


def test_network_rates_match_closed_form():
    """With no feature bonus the link rate depends only on response match."""
    cfg = plain_config(n=300, p=1, phi=())
    y, x, _ = gen_nnb(cfg, seed=(13,))
    edges = gen_network(y, x, cfg, seed=(13,))
    same_edges = diff_edges = 0
    for s, t in edges:
        if y[s - 1] == y[t - 1]:
            same_edges += 1
        else:
            diff_edges += 1
    n_y = np.bincount(y, minlength=3)[1:]
    same_pairs = int(np.sum(n_y * (n_y - 1)))
    diff_pairs = 300 * 299 - same_pairs
    # odds same: n^-1/2, odds diff: 0.5 n^-1/2
    p_same = 1.0 / (1.0 + math.sqrt(300))
    p_diff = 1.0 / (1.0 + 2 * math.sqrt(300))
    for got, pairs, want in ((same_edges, same_pairs, p_same),
                             (diff_edges, diff_pairs, p_diff)):
        se = math.sqrt(want * (1 - want) / pairs)
        assert abs(got / pairs - want) < 3 * se, (got / pairs, want)


def test_feature_agreement_raises_link_rate():
    cfg = plain_config(n=300, p=1, phi=((1, 2.0),),
                       default_column={"kind": "bern", "p": 0.5})
    y, x, _ = gen_nnb(cfg, seed=(14,))
    edges = gen_network(y, x, cfg, seed=(14,))
    col = x[:, 0]
    agree = sum(1 for s, t in edges if col[s - 1] == col[t - 1])
    assert agree > len(edges) - agree  # bonus makes agreeing links dominate


# ------------------------------------------------------------- noise pass

def test_noise_rates_frozen():
    keep, add = noise_rates(300, 0.4)
    assert keep == pytest.approx(1.0 - 300 ** -0.6)
    assert add == pytest.approx(10.0 * 300 ** -1.6)
    assert keep == pytest.approx(0.9673615, abs=1e-6)
    assert add == pytest.approx(0.0010880, abs=1e-6)


def test_perturb_network_edge_cases():
    edges = np.array([[1, 2], [2, 3], [3, 1]])
    # keep everything, add nothing: identity
    out = perturb_network(edges, 4, 1.0, 0.0, seed=0)
    assert np.array_equal(out, edges)
    # drop everything
    out = perturb_network(edges, 4, 0.0, 0.0, seed=0)
    assert out.shape == (0, 2)
    # add every absent ordered pair: the complete directed graph
    out = perturb_network(edges, 4, 1.0, 1.0, seed=0)
    assert out.shape == (12, 2)
    assert len({(int(s), int(t)) for s, t in out}) == 12
    assert np.all(out[:, 0] != out[:, 1])


def test_perturb_network_is_seeded():
    edges = np.array([[i + 1, ((i + 1) % 20) + 1] for i in range(20)])
    a = perturb_network(edges, 20, 0.5, 0.05, seed=3)
    b = perturb_network(edges, 20, 0.5, 0.05, seed=3)
    assert np.array_equal(a, b)


def test_noisy_example_stays_valid():
    cfg = example_config(5, n=60, p=5)
    assert cfg.noise == {"s": 0.4}
    ds, _ = generate(cfg, seed=2)
    assert ds.n == 60  # validates: no duplicate edges, no self-loops


# ------------------------------------------------------- ready-made configs

def test_example_configs_cover_designed_scenarios():
    ex1 = example_config(1, n=100, p=10)
    assert ex1.s_y == FeatureSet((1, 2))
    assert ex1.s_a == FeatureSet((3, 4))
    assert ex1.phi == ((3, 0.4), (4, 0.4))
    assert ex1.true_features().keys() == ("1", "2", "3", "4")

    ex2 = example_config(2, n=100, p=10)
    assert ex2.s_a == FeatureSet((1, 2, 3, 4))
    assert len(ex2.phi) == 4

    ex3 = example_config(3, n=100, p=10)
    assert ex3.s_y == FeatureSet((1,), ((1, 2),))
    assert ex3.s_a == FeatureSet((3, 4), ((3, 4),))
    assert ((3, 4), 0.2) in ex3.phi
    assert ex3.true_features().keys() == ("1", "3", "4", "1&2", "3&4")
    assert ex3.columns[2]["kind"] == "cond_yx"
    assert ex3.columns[2]["parent"] == 1

    ex6 = example_config(6, n=100, p=10)
    assert ex6.column_width(1) == 4
    assert ex6.column_width(9) == 4

    ex7 = example_config(7, n=100, p=10)
    assert ex7.r_levels == 4

    ex8 = example_config(8, n=100, p=10)
    assert ex8.columns[5]["mu"] == [-1.0, 1.0]
    assert ex8.column_width(5) == 4

    ex9 = example_config(9, n=100, p=10)
    assert ex9.model == "nlr"
    assert ex9.response["kind"] == "logistic"

    assert example_config("ex2", n=50, p=5).name == "ex2"


def test_example_config_rejects_model_mismatch():
    with pytest.raises(ValidationError):
        example_config(9, model="nnb")
    with pytest.raises(ValidationError):
        example_config(4, model="nlr")
    with pytest.raises(ValidationError):
        example_config(10)
    with pytest.raises(ValidationError):
        example_config(1, model="mystery")


def test_config_round_trips_through_json():
    for ex in (1, 3, 8, 9):
        cfg = example_config(ex, n=70, p=8)
        blob = json.dumps(cfg.to_dict())
        back = SimulationConfig.from_dict(json.loads(blob))
        assert back.to_dict() == cfg.to_dict()
        assert back.s_y == cfg.s_y and back.phi == cfg.phi


def test_check_config_rejects_structural_problems():
    with pytest.raises(ValidationError):
        check_config(plain_config(model="frog"))
    with pytest.raises(ValidationError):
        check_config(plain_config(n=1))
    with pytest.raises(ValidationError):
        check_config(plain_config(columns={9: {"kind": "bern", "p": 0.5}}))
    # the logistic model generates y last, so columns cannot condition on it
    with pytest.raises(ValidationError):
        check_config(plain_config(
            model="nlr",
            columns={1: {"kind": "cond_y", "table": [[0.5, 0.5], [0.5, 0.5]]}},
            response={"kind": "logistic", "terms": [[[2], 1.0]]}))
    with pytest.raises(ValidationError):  # parent must come earlier
        check_config(plain_config(columns={
            2: {"kind": "cond_x", "parent": 3, "table": [[0.5, 0.5], [0.5, 0.5]]}}))
    with pytest.raises(ValidationError):  # rows must be probabilities
        check_config(plain_config(columns={
            1: {"kind": "cond_y", "table": [[0.7, 0.7], [0.5, 0.5]]}}))
    with pytest.raises(ValidationError):
        check_config(plain_config(noise={"s": 0.0}))
    with pytest.raises(ValidationError):
        check_config(plain_config(phi=((7, 0.4),)))


def test_continuous_columns_are_binned_and_raw_is_kept():
    cfg = example_config(8, n=200, p=8)
    ds, extras = generate(cfg, seed=4)
    assert np.all(ds.k_levels == 4)
    assert set(extras["raw"]) == set(range(1, 9))  # every column is normal
    raw5 = extras["raw"][5]
    assert raw5.shape == (200,)
    assert np.array_equal(discretize(raw5, 4), ds.column(5))
    # the response-shifted column separates the means
    assert (raw5[ds.y == 2].mean() - raw5[ds.y == 1].mean()) > 1.0


def test_generate_reports_truth():
    ds, extras = generate(example_config(3, n=50, p=6), seed=1)
    assert extras["true_features"].keys() == ("1", "3", "4", "1&2", "3&4")
    assert ds.p == 6
    assert extras["raw"] == {}
