"""Metrics and the distill x objective x size x classifier experiment grid."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _io
from .classifiers import ClassifierSpec, predict_proba, train_classifier
from .distiller import DistillConfig, SyntheticSet, distill
from .kernel_ridge import KernelSpec, median_bandwidth
from .objectives import ObjectiveSpec
from .tabular_data import Dataset, random_subset

log = logging.getLogger(__name__)

CSV_COLUMNS = ("dataset", "source", "objective", "m", "classifier", "seed",
               "auc", "f1", "balanced_accuracy", "minority_recall", "status")
METRICS = ("auc", "f1", "balanced_accuracy", "minority_recall")

__all__ = ["ClassifierSpec", "EvalReport", "SweepResult", "auc", "evaluate", "predict_proba",
           "sweep", "train_classifier"]


def auc(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), from midranks of the pooled scores."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int((y == 1).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    # midranks: each tie block [i, j) gets the average of ranks i+1 .. j
    starts = np.flatnonzero(np.r_[True, ss[1:] != ss[:-1]])
    ends = np.r_[starts[1:], ss.size]
    block_rank = 0.5 * (starts + 1 + ends)
    ranks = np.empty(ss.size)
    ranks[order] = np.repeat(block_rank, ends - starts)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class EvalReport:
    auc: float
    f1: float
    balanced_accuracy: float
    minority_recall: float
    n_train: int = 0
    n_test: int = 0
    threshold: float = 0.5


def classification_metrics(scores, labels, threshold=0.5, n_train=0) -> EvalReport:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(np.int64)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    recall = tp / (tp + fn)
    specificity = tn / (tn + fp)
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return EvalReport(auc(s, y), f1, 0.5 * (recall + specificity), recall,
                      n_train, y.size, threshold)


def evaluate(model, test: Dataset, threshold: float = 0.5, n_train: int = 0) -> EvalReport:
    if test.n == 0:
        raise ValueError("empty test set")
    return classification_metrics(predict_proba(model, test.features), test.labels,
                                  threshold, n_train)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            out = []
            for c in CSV_COLUMNS:
                v = r[c]
                if c in METRICS:
                    v = "" if v is None else _io.fmt(v)
                out.append(v)
            w.writerow(out)
        return buf.getvalue()

    def to_json(self) -> str:
        return _io.dumps({"columns": list(CSV_COLUMNS), "rows": self.rows})

    def select(self, **where) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in where.items())]


def cell_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _row(dataset, source, objective, m, clf, seed, report=None, error=None):
    row = {"dataset": dataset, "source": source, "objective": objective, "m": int(m),
           "classifier": clf.kind, "seed": int(seed)}
    for k in METRICS:
        row[k] = None if report is None else float(getattr(report, k))
    row["status"] = "ok" if error is None else f"error: {error}"
    return row


def _fit_and_score(clf, train_set, test, threshold):
    model = train_classifier(clf, train_set)
    n_train = train_set.m if isinstance(train_set, SyntheticSet) else train_set.n
    return evaluate(model, test, threshold, n_train)


def _err(exc) -> str:
    return f"{type(exc).__name__}: {exc}".replace("\n", " ")


def _run_cell(job):
    """One grid cell: distill (or subsample) once, then score every classifier."""
    (kind, dataset_id, train, test, objective, oi, m, si, seed, classifiers, base, threshold) = job
    rows = []
    try:
        if kind == "distilled":
            cfg = replace(base, m=int(m), objective=objective, seed=cell_seed(seed, oi, si))
            train_set, _ = distill(train, cfg)
            obj_name = objective.kind
        elif kind == "random_subset":
            train_set = random_subset(train, int(m), True, cell_seed(seed, si))
            obj_name = ""
        else:
            train_set = train
            obj_name = ""
    except Exception as exc:  # per-cell failure is recorded, not raised
        log.warning("%s cell (objective=%s, m=%s, seed=%s) failed: %s",
                    kind, getattr(objective, "kind", ""), m, seed, exc)
        return [_row(dataset_id, kind, getattr(objective, "kind", ""), m, c, seed, error=_err(exc))
                for c in classifiers]
    for c in classifiers:
        c = replace(c, seed=int(seed))
        try:
            rows.append(_row(dataset_id, kind, obj_name, m, c, seed,
                             _fit_and_score(c, train_set, test, threshold)))
        except Exception as exc:
            rows.append(_row(dataset_id, kind, obj_name, m, c, seed, error=_err(exc)))
    return rows


def sweep(train: Dataset, test: Dataset, objectives, sizes, classifiers, seeds,
          include_random_baseline=False, include_full_baseline=False, *,
          base_config: DistillConfig | None = None, dataset_id: str | None = None,
          threshold: float = 0.5, jobs: int = 1) -> SweepResult:
    """Run the full grid. Row order: distilled (objective, m, seed, classifier), then the
    random baseline (m, seed, classifier), then the full-train baseline (seed, classifier).

    A missing kernel in ``base_config`` or in a krr ClassifierSpec resolves to one rbf
    kernel whose bandwidth is the median pairwise distance of ``train``, shared by every cell.
    """
    base = base_config or DistillConfig()
    dataset_id = dataset_id or train.name
    objectives = [o if isinstance(o, ObjectiveSpec) else ObjectiveSpec(o) for o in objectives]
    classifiers = [c if isinstance(c, ClassifierSpec) else ClassifierSpec(c) for c in classifiers]
    kernel = base.kernel or KernelSpec("rbf", median_bandwidth(train.features, 0))
    base = replace(base, kernel=kernel)
    classifiers = [replace(c, kernel=kernel, lam=base.lam) if c.kind == "krr" and c.kernel is None
                   else c for c in classifiers]

    jobs_list = []
    for oi, obj in enumerate(objectives):
        for si, m in enumerate(sizes):
            for seed in seeds:
                jobs_list.append(("distilled", dataset_id, train, test, obj, oi, m, si, seed,
                                  classifiers, base, threshold))
    if include_random_baseline:
        for si, m in enumerate(sizes):
            for seed in seeds:
                jobs_list.append(("random_subset", dataset_id, train, test, None, -1, m, si, seed,
                                  classifiers, base, threshold))
    if include_full_baseline:
        for seed in seeds:
            jobs_list.append(("original", dataset_id, train, test, None, -1, train.n, -1, seed,
                              classifiers, base, threshold))

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            chunks = list(ex.map(_run_cell, jobs_list))
    else:
        chunks = [_run_cell(j) for j in jobs_list]
    return SweepResult([r for chunk in chunks for r in chunk])


def summarize(result: SweepResult, metric: str = "auc") -> dict:
    """Mean metric per (source, objective, m, classifier) over seeds, skipping failed rows."""
    acc: dict = {}
    for r in result.rows:
        if r[metric] is None:
            continue
        acc.setdefault((r["source"], r["objective"], r["m"], r["classifier"]), []).append(r[metric])
    return {k: float(np.mean(v)) for k, v in acc.items()}
