"""PCA projection of original and distilled data into a shared low-dimensional frame."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _io


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x D, orthonormal rows
    explained_variance: np.ndarray


def pca_fit(X, k: int) -> PcaModel:
    """Top-k eigenvectors of the sample covariance (ddof=1).

    Each component is flipped so its largest-magnitude coordinate is positive.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least two rows")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} outside [1, {min(n - 1, d)}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    if not np.trace(cov) > 0:
        raise ValueError("data has zero total variance")
    evals, evecs = np.linalg.eigh(cov)
    top = np.argsort(evals, kind="stable")[::-1][:k]
    comps = evecs[:, top].T.copy()
    lead = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(k), lead])[:, None]
    return PcaModel(mean, comps, np.maximum(evals[top], 0.0))


def project(model: PcaModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.mean.shape[0]:
        raise ValueError(f"width {X.shape[1]} != fitted width {model.mean.shape[0]}")
    return (X - model.mean) @ model.components.T


def projection_report(original, coresets=(), k: int = 2) -> list[tuple]:
    """Rows (source, pc1, pc2, class) for the original data and each labelled coreset.

    The basis is fit on ``original`` only; coresets must be in the same feature units.
    """
    model = pca_fit(original.features, k)
    rows = [("original", *p[:2], int(c))
            for p, c in zip(project(model, original.features), original.labels)]
    for label, s in coresets:
        if s.X_s.shape[1] != original.d:
            raise ValueError(f"coreset {label!r} has width {s.X_s.shape[1]}, "
                             f"original has {original.d}")
        rows += [(label, *p[:2], int(c)) for p, c in zip(project(model, s.X_s), s.y_class)]
    return rows


def report_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", "pc1", "pc2", "class"])
    for src, a, b, c in rows:
        w.writerow([src, _io.fmt(a), _io.fmt(b), c])
    return buf.getvalue()
