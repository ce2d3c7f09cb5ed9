import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from tabkip.classifiers import ClassifierSpec, predict_proba, train_classifier
from tabkip.distiller import DistillConfig, SyntheticSet
from tabkip.evaluator import (CSV_COLUMNS, auc, classification_metrics, evaluate, summarize,
                              sweep)
from tabkip.kernel_ridge import KernelSpec
from tabkip.tabular_data import Dataset, SplitSpec, gen_synthetic, split, standardize


def brute_auc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum((p > q) + 0.5 * (p == q) for p, q in itertools.product(pos, neg))
    return wins / (pos.size * neg.size)


# --- AUC ------------------------------------------------------------------------------

def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.1, 0.9], [1, 0]) == 0.0
    assert auc([0.3] * 6, [1, 0, 0, 1, 0, 0]) == 0.5


@pytest.mark.parametrize("seed", range(50))
def test_auc_matches_pair_count(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 201))
    s = r.integers(0, 12, n).astype(float)  # plenty of ties
    y = r.integers(0, 2, n)
    y[:2] = [0, 1]
    assert auc(s, y) == brute_auc(s, y)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_auc_monotone_invariance_and_reflection(seed):
    r = np.random.default_rng(seed)
    s = r.normal(size=60)
    y = r.integers(0, 2, 60)
    y[:2] = [0, 1]
    a = auc(s, y)
    assert auc(np.exp(s), y) == a
    assert auc(3.0 * s - 7.0, y) == a
    assert a + auc(-s, y) == pytest.approx(1.0, abs=1e-15)


def test_auc_errors():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auc([0.1, 0.2, 0.3], [1, 0])


# --- threshold metrics -----------------------------------------------------------------

def test_perfect_scores_give_perfect_metrics():
    y = np.array([1, 0, 0, 1, 0])
    rep = classification_metrics(y.astype(float), y)
    assert (rep.auc, rep.f1, rep.balanced_accuracy, rep.minority_recall) == (1, 1, 1, 1)


def test_constant_half_scores_predict_positive():
    y = np.array([1] * 20 + [0] * 80)
    rep = classification_metrics(np.full(100, 0.5), y)
    prev = 0.2
    assert rep.minority_recall == 1.0
    assert rep.f1 == pytest.approx(2 * prev / (1 + prev))
    assert rep.balanced_accuracy == 0.5 and rep.auc == 0.5


def test_all_negative_predictions_have_zero_f1():
    rep = classification_metrics([0.1, 0.2, 0.3], [1, 0, 0])
    assert rep.f1 == 0.0 and rep.minority_recall == 0.0


def test_metrics_permutation_invariant(rng):
    s = rng.random(200)
    y = (rng.random(200) < 0.3).astype(int)
    p = rng.permutation(200)
    assert classification_metrics(s, y) == classification_metrics(s[p], y[p])


# --- classifiers --------------------------------------------------------------------------

def _two_clusters(sep=6.0, n=100, seed=0):
    r = np.random.default_rng(seed)
    y = np.r_[np.ones(n // 2), np.zeros(n - n // 2)].astype(int)
    X = r.standard_normal((n, 2)) + np.outer(y - 0.5, [sep, 0.0])
    return Dataset(X, y, ["a", "b"])


def test_knn_k1_recovers_training_labels():
    ds = gen_synthetic(300, 3, 3, 0.5, seed=1)
    p = predict_proba(train_classifier(ClassifierSpec("knn", k=1), ds), ds.features)
    np.testing.assert_array_equal(p, ds.labels)


def test_knn_all_negative_neighbours():
    ds = _two_clusters()
    model = train_classifier(ClassifierSpec("knn", k=5), ds)
    assert predict_proba(model, [[-10.0, 0.0]])[0] == 0.0


def test_logreg_separable_auc_one():
    tr, te = _two_clusters(seed=0), _two_clusters(seed=1)
    assert evaluate(train_classifier(ClassifierSpec("logreg"), tr), te).auc == 1.0


def test_logreg_stops_at_tolerance():
    ds = gen_synthetic(200, 2, 2, 1.0, seed=0)
    m = train_classifier(ClassifierSpec("logreg", l2=1.0, tol=0.05), ds)
    assert m.n_iter < 5000


def test_cart_needs_depth_two_for_xor():
    X = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]] * 25, dtype=float)
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    ds = Dataset(X, y, ["a", "b"])
    shallow = train_classifier(ClassifierSpec("cart", max_depth=1), ds)
    deep = train_classifier(ClassifierSpec("cart", max_depth=2), ds)
    assert abs(auc(predict_proba(shallow, X), y) - 0.5) < 0.05
    assert auc(predict_proba(deep, X), y) > 0.9


def test_cart_leaves_are_class_fractions(small_task):
    tr, _ = small_task
    stump = train_classifier(ClassifierSpec("cart", max_depth=0), tr)
    assert np.all(predict_proba(stump, tr.features) == tr.n_pos / tr.n)


def test_single_tree_forest_is_cart(small_task):
    tr, te = small_task
    cart = train_classifier(ClassifierSpec("cart", max_depth=5, seed=3), tr)
    forest = train_classifier(ClassifierSpec("forest", max_depth=5, n_trees=1, max_features=1.0,
                                             seed=3), tr)
    np.testing.assert_array_equal(predict_proba(cart, te.features),
                                  predict_proba(forest, te.features))


def test_unanimous_forest_votes_one():
    ds = _two_clusters(sep=20.0)
    model = train_classifier(ClassifierSpec.forest(n_trees=10), ds)
    assert predict_proba(model, [[10.0, 0.0]])[0] == 1.0


def test_forest_deterministic(small_task):
    tr, te = small_task
    spec = ClassifierSpec.forest(n_trees=5, seed=4)
    a = predict_proba(train_classifier(spec, tr), te.features)
    b = predict_proba(train_classifier(spec, tr), te.features)
    np.testing.assert_array_equal(a, b)


def test_krr_probability_is_sigmoid_of_score(small_task):
    tr, te = small_task
    model = train_classifier(ClassifierSpec("krr", kernel=KernelSpec("rbf", 2.0)), tr)
    np.testing.assert_array_equal(model.predict_proba(te.features),
                                  expit(model.decision_function(te.features)))


def test_krr_on_coreset_regresses_on_ys_when_asked():
    X = np.array([[0.0], [1.0], [2.0]])
    s = SyntheticSet(X, np.array([3.0, -2.0, -1.0]), np.array([1, 0, 0]))
    k = KernelSpec("rbf", 0.5)
    a = train_classifier(ClassifierSpec("krr", kernel=k, regress_on_ys=True), s)
    b = train_classifier(ClassifierSpec("krr", kernel=k), s)
    assert a.decision_function(X)[0] == pytest.approx(3.0, abs=1e-4)
    assert b.decision_function(X)[0] == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("kind", ["krr", "logreg", "knn", "cart", "forest"])
def test_probabilities_in_unit_interval_and_width_checked(small_task, kind):
    tr, te = small_task
    model = train_classifier(ClassifierSpec(kind, n_trees=5), tr)
    p = predict_proba(model, te.features)
    assert p.shape == (te.n,) and np.all((0 <= p) & (p <= 1))
    with pytest.raises(ValueError):
        predict_proba(model, te.features[:, :2])


def test_invalid_classifier_spec():
    with pytest.raises(ValueError):
        ClassifierSpec("svm")
    with pytest.raises(ValueError):
        ClassifierSpec("knn", k=0)


# --- sweep ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny():
    ds = standardize(gen_synthetic(300, 3, 3, 2.0, seed=8))
    return split(ds, SplitSpec(0.3, True, 8))


def _grid(tiny, **kw):
    tr, te = tiny
    base = DistillConfig(epochs=2, batch_size=64)
    return sweep(tr, te, ["mse", "ce"], [6, 10, 14], ["krr", "logreg"], [0, 1],
                 base_config=base, **kw)


def test_sweep_cardinality_and_order(tiny):
    res = _grid(tiny)
    assert len(res) == 24
    assert all(r["status"] == "ok" and r["source"] == "distilled" for r in res.rows)
    assert [r["objective"] for r in res.rows[:12]] == ["mse"] * 12
    lines = res.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 25


def test_sweep_baselines_add_rows(tiny):
    res = _grid(tiny, include_full_baseline=True, include_random_baseline=True)
    full = res.select(source="original")
    rand = res.select(source="random_subset")
    assert len(full) == 2 * 2 and {r["m"] for r in full} == {tiny[0].n}
    assert len(rand) == 3 * 2 * 2
    assert len(res) == 24 + 4 + 12


def test_sweep_deterministic(tiny):
    assert _grid(tiny).to_csv() == _grid(tiny).to_csv()


def test_sweep_parallel_matches_serial(tiny):
    assert _grid(tiny, jobs=2).to_csv() == _grid(tiny).to_csv()


def test_full_size_zero_epoch_distill_equals_random_baseline(tiny):
    tr, te = tiny
    base = DistillConfig(epochs=0)
    res = sweep(tr, te, ["mse"], [tr.n], ["krr", "logreg", "knn"], [3], True,
                base_config=base)
    for clf in ("krr", "logreg", "knn"):
        d, = res.select(source="distilled", classifier=clf)
        r, = res.select(source="random_subset", classifier=clf)
        for k in ("auc", "f1", "balanced_accuracy", "minority_recall"):
            assert d[k] == pytest.approx(r[k], abs=1e-9)


def test_failed_cells_are_recorded(tiny):
    tr, te = tiny
    res = sweep(tr, te, ["ce"], [5, tr.n + 50], ["krr", "knn"], [0],
                base_config=DistillConfig(epochs=1))
    assert len(res) == 4
    bad = [r for r in res.rows if r["status"] != "ok"]
    assert len(bad) == 2 and all(r["auc"] is None for r in bad)
    assert all(r["status"].startswith("error: DataError") for r in bad)
    assert ",,,," in res.to_csv()
    json_text = res.to_json()
    assert '"status": "error: DataError' in json_text


def test_summarize_averages_seeds(tiny):
    res = _grid(tiny)
    summ = summarize(res)
    key = ("distilled", "mse", 6, "krr")
    vals = [r["auc"] for r in res.select(source="distilled", objective="mse", m=6,
                                         classifier="krr")]
    assert summ[key] == pytest.approx(np.mean(vals))
