import numpy as np
import pytest

from netscreen import FeatureSet, NodeDataset, ValidationError, validate
from netscreen.classify import (
    KINDS, ClassifierSpec, MetricsReport, _rank_auc, evaluate, fit, predict,
    predict_scores, screening_metrics,
)
from netscreen.screening import interaction_expand

from oracles import oracle_classifier_scores, random_instance


def as_dataset(y, x, edges, r, k):
    x = np.asarray(x)
    return validate(NodeDataset(
        y=y, x=x, edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        r_levels=r, k_levels=np.full(x.shape[1], k)))


def mains(*cols):
    return FeatureSet(tuple(cols), ())


def test_scores_match_loop_oracle():
    """All three score types against literal per-neighbor loops."""
    rng = np.random.default_rng(41)
    for trial in range(25):
        y, x, edges, r, k = random_instance(rng, p=3)
        ds = as_dataset(y, x, edges, r, k)
        n = len(y)
        if trial % 2:
            mask = rng.uniform(size=n) < 0.7
            mask[rng.integers(n)] = True  # never an empty fit
        else:
            mask = np.ones(n, dtype=bool)
        targets = list(range(1, n + 1))
        widths = {j: k for j in (1, 2, 3)}
        for kind in KINDS:
            spec = ClassifierSpec(kind, s_y=mains(1, 2), s_a=mains(2, 3))
            clf = fit(spec, ds, train_mask=mask)
            got = predict_scores(clf, ds, targets)
            want = oracle_classifier_scores(
                kind, y, x, edges, [1, 2], [2, 3], widths, r, mask, targets)
            np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10)


def test_fitted_tables_frozen_values():
    """Smoothed cells checked against hand arithmetic (alpha = 1/2)."""
    y = np.array([1, 2, 2])
    x = np.array([[1], [2], [1]])
    ds = as_dataset(y, x, [(1, 2)], 2, 2)
    clf = fit(ClassifierSpec("type2", s_y=mains(1)), ds)
    np.testing.assert_allclose(np.exp(clf.log_prior), [0.375, 0.625])
    # P(x=1 | y=1) = (1 + .5) / (1 + 1); P(x=1 | y=2) = (1 + .5) / (2 + 1)
    np.testing.assert_allclose(np.exp(clf.log_cond[1]),
                               [[0.75, 0.25], [0.5, 0.5]])
    # ordered-pair cells: P0 = [[0, 2], [2, 2]], one edge in cell (1, 2)
    np.testing.assert_allclose(np.exp(clf.log_pi0),
                               [[0.5, 0.5], [1 / 6, 1 / 6]])


def test_ties_resolve_to_smallest_level():
    y = np.array([1, 2, 1, 2])
    x = np.ones((4, 1), dtype=np.int64)
    ds = as_dataset(y, x, [], 2, 1)
    clf = fit(ClassifierSpec("type1"), ds)  # balanced prior, no features
    assert predict(clf, ds).tolist() == [1, 1, 1, 1]


def test_type3_without_link_features_is_type2():
    rng = np.random.default_rng(42)
    y, x, edges, r, k = random_instance(rng, p=2)
    ds = as_dataset(y, x, edges, r, k)
    s2 = predict_scores(fit(ClassifierSpec("type2", s_y=mains(1)), ds), ds)
    s3 = predict_scores(
        fit(ClassifierSpec("type3", s_y=mains(1), s_a=FeatureSet()), ds), ds)
    assert np.array_equal(s2, s3)


def test_composite_features_need_expanded_columns():
    rng = np.random.default_rng(43)
    y, x, edges, r, k = random_instance(rng, p=2)
    ds = as_dataset(y, x, edges, r, k)
    paired = FeatureSet((1,), ((1, 2),))
    with pytest.raises(ValidationError):
        fit(ClassifierSpec("type1", s_y=paired), ds)
    wide = interaction_expand(ds, [(1, 2)])
    clf = fit(ClassifierSpec("type1", s_y=paired), wide)
    assert clf.cols_y == (1, 3)
    assert np.all(np.isfinite(predict_scores(clf, wide)))


def test_spec_rejects_bad_arguments():
    with pytest.raises(ValidationError):
        ClassifierSpec("type4")
    with pytest.raises(ValidationError):
        ClassifierSpec("type1", smoothing=0.0)


def test_predict_scores_checks_dataset_shape():
    rng = np.random.default_rng(44)
    y, x, edges, r, k = random_instance(rng, p=2)
    ds = as_dataset(y, x, edges, r, k)
    clf = fit(ClassifierSpec("type1", s_y=mains(1)), ds)
    other = as_dataset(np.r_[y, y], np.r_[x, x],
                       [(1, len(y) + 1)], r, k)
    with pytest.raises(ValidationError):
        predict_scores(clf, other)
    with pytest.raises(ValidationError):
        predict_scores(clf, ds, targets=[0])
    with pytest.raises(ValidationError):
        predict_scores(clf, ds, targets=[len(y) + 1])


def test_rank_auc_values():
    # separated: every positive above every negative
    assert _rank_auc(np.array([0.9, 0.1, 0.5]),
                     np.array([True, False, False])) == 1.0
    # one tie counts half: pairs (tie, win) -> 0.75
    assert _rank_auc(np.array([0.5, 0.5, 0.1]),
                     np.array([True, False, False])) == 0.75
    assert np.isnan(_rank_auc(np.array([0.5, 0.1]),
                              np.array([True, True])))


def test_evaluate_returns_accuracy_and_auc():
    rng = np.random.default_rng(45)
    n = 30
    y = np.r_[1, 2, rng.integers(1, 3, n - 2)].astype(np.int64)
    x = (y[:, None] == 1) + 1  # level tracks the response: easy problem
    edges = [(s + 1, t + 1) for s in range(n) for t in range(n)
             if s != t and rng.uniform() < 0.1]
    ds = as_dataset(y, x.astype(np.int64), edges, 2, 2)
    clf = fit(ClassifierSpec("type1", s_y=mains(1)), ds)
    acc, auc = evaluate(clf, ds, auc=True)
    assert acc == 1.0
    assert auc == 1.0
    acc_only, none_auc = evaluate(clf, ds)
    assert acc_only == 1.0 and none_auc is None
    # single-class target slice: AUC undefined
    ones = [i + 1 for i in range(n) if y[i] == 1]
    _, auc_nan = evaluate(clf, ds, targets=ones, auc=True)
    assert np.isnan(auc_nan)


def test_auc_requires_two_level_response():
    y = np.array([1, 2, 3, 1, 2, 3])
    x = np.ones((6, 1), dtype=np.int64)
    ds = as_dataset(y, x, [(1, 2)], 3, 1)
    clf = fit(ClassifierSpec("type1"), ds)
    with pytest.raises(ValidationError):
        evaluate(clf, ds, auc=True)


def test_holdout_evaluation_uses_only_fitted_nodes():
    rng = np.random.default_rng(46)
    y, x, edges, r, k = random_instance(rng, p=2)
    n = len(y)
    mask = np.zeros(n, dtype=bool)
    mask[: max(2, n // 2)] = True
    ds = as_dataset(y, x, edges, r, k)
    clf = fit(ClassifierSpec("type3", s_y=mains(1), s_a=mains(2)), ds,
              train_mask=mask)
    held = [i + 1 for i in range(n) if not mask[i]]
    scores = predict_scores(clf, ds, held)
    assert scores.shape == (len(held), r)
    assert np.all(np.isfinite(scores))


def test_screening_metrics_aggregation():
    truth = FeatureSet.from_keys(["1", "2", "3&4"])
    picks = [FeatureSet.from_keys(["1", "2", "3&4"]),
             FeatureSet.from_keys(["1", "5"])]
    rep = screening_metrics(picks, truth, acc=0.9)
    assert rep.cmf == 2.0
    assert rep.imf == 0.5
    assert rep.cp == {"1": 1.0, "2": 0.5, "3&4": 0.5}
    assert rep.n_reps == 2
    assert rep.acc == 0.9 and rep.auc is None
    d = rep.to_dict()
    assert d["cmf"] == 2.0 and "auc" not in d
    assert isinstance(rep, MetricsReport)
    with pytest.raises(ValidationError):
        screening_metrics([], truth)
