"""Kernel ridge regression with closed-form reverse-mode gradients.

The predictor is Z = K(X_t, X_s) (K(X_s, X_s) + lam * m * I)^-1 y_s. ``krr_backward``
returns the adjoints of Z with respect to the support points and support labels, which
is what the distillation loop needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg


class KernelSolveError(ArithmeticError):
    """The regularized Gram matrix could not be factorized."""


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear", "polynomial"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.bandwidth > 0:
            raise ValueError("rbf bandwidth must be positive")
        if self.kind == "polynomial" and int(self.degree) < 1:
            raise ValueError("polynomial degree must be >= 1")


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d2, 0.0)


def gram(A: np.ndarray, B: np.ndarray, spec: KernelSpec) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "rbf":
        K = np.exp(-_sq_dists(A, B) / (2.0 * spec.bandwidth**2))
        if A is B:
            np.fill_diagonal(K, 1.0)
            K = 0.5 * (K + K.T)
        return K
    inner = A @ B.T
    if spec.kind == "linear":
        return inner
    return (inner + spec.offset) ** int(spec.degree)


def _gram_grad_b(A: np.ndarray, B: np.ndarray, W: np.ndarray, spec: KernelSpec,
                 K: np.ndarray | None = None) -> np.ndarray:
    """d/dB of sum_ij W_ij k(A_i, B_j), holding A fixed."""
    if spec.kind == "rbf":
        if K is None:
            K = gram(A, B, spec)
        P = W * K
        return (P.T @ A - P.sum(0)[:, None] * B) / spec.bandwidth**2
    if spec.kind == "linear":
        return W.T @ A
    deg = int(spec.degree)
    base = A @ B.T + spec.offset
    return (W * (deg * base ** (deg - 1))).T @ A


def median_bandwidth(X: np.ndarray, seed: int = 0, max_pairs: int = 1_000_000) -> float:
    """Median pairwise Euclidean distance.

    Small inputs use every unordered pair; otherwise ``max_pairs`` random pairs of
    distinct rows are drawn.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("median bandwidth needs at least two rows")
    if n * (n - 1) // 2 <= max_pairs:
        i, j = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n - 1, size=max_pairs)
        j = j + (j >= i)
    d = np.sqrt(((X[i] - X[j]) ** 2).sum(1))
    h = float(np.median(d))
    if not h > 0:
        raise ValueError("median pairwise distance is zero")
    return h


@dataclass(frozen=True)
class KrrModel:
    support_points: np.ndarray
    support_labels: np.ndarray
    dual_coefficients: np.ndarray
    ridge: float
    kernel: KernelSpec
    # lam * m actually added to the diagonal (larger than ridge * m after a jitter retry)
    diag_shift: float = 0.0
    _factor: tuple | None = field(default=None, repr=False, compare=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self._factor, rhs, check_finite=False)


def _factorize(K: np.ndarray, shift: float) -> tuple[tuple, float]:
    m = K.shape[0]
    for s in (shift, shift + 10.0 * shift):
        try:
            A = K + s * np.eye(m)
            return linalg.cho_factor(A, lower=True, check_finite=True), s
        except (linalg.LinAlgError, ValueError):
            continue
    try:
        cond = np.linalg.cond(K + shift * np.eye(m))
    except np.linalg.LinAlgError:
        cond = float("inf")
    raise KernelSolveError(
        f"Cholesky failed for m={m} gram matrix (diag shift {shift:.3g}, with 10x retry); "
        f"condition number ~{cond:.3g}, finite={bool(np.all(np.isfinite(K)))}"
    )


def krr_fit(X_s: np.ndarray, y_s: np.ndarray, lam: float, spec: KernelSpec) -> KrrModel:
    X_s = np.atleast_2d(np.asarray(X_s, dtype=float))
    y_s = np.asarray(y_s, dtype=float)
    m = X_s.shape[0]
    if m < 1 or y_s.shape != (m,):
        raise ValueError("support labels must have one entry per support point")
    if not lam > 0:
        raise ValueError("ridge must be positive")
    K = gram(X_s, X_s, spec)
    factor, shift = _factorize(K, lam * m)
    alpha = linalg.cho_solve(factor, y_s, check_finite=False)
    return KrrModel(X_s, y_s, alpha, lam, spec, shift, factor)


def krr_predict(model: KrrModel, X_t: np.ndarray) -> np.ndarray:
    X_t = np.atleast_2d(np.asarray(X_t, dtype=float))
    if X_t.shape[1] != model.support_points.shape[1]:
        raise ValueError(
            f"target width {X_t.shape[1]} != support width {model.support_points.shape[1]}")
    return gram(X_t, model.support_points, model.kernel) @ model.dual_coefficients


def krr_backward(X_s, y_s, X_t, lam, spec, upstream, model: KrrModel | None = None):
    """Adjoints (dL/dX_s, dL/dy_s) of Z = K_ts A^-1 y_s given upstream = dL/dZ.

    ``model`` may carry an existing factorization of A for the same (X_s, y_s, lam).
    """
    X_s = np.atleast_2d(np.asarray(X_s, dtype=float))
    X_t = np.atleast_2d(np.asarray(X_t, dtype=float))
    g = np.asarray(upstream, dtype=float)
    if g.shape != (X_t.shape[0],):
        raise ValueError("upstream must have one entry per target row")
    if X_t.shape[1] != X_s.shape[1]:
        raise ValueError("target and support widths differ")
    if model is None:
        model = krr_fit(X_s, y_s, lam, spec)
    alpha = model.dual_coefficients
    K_ts = gram(X_t, X_s, spec)
    w = model.solve(K_ts.T @ g)                 # dL/dy_s = A^-1 K_ts^T g
    G_ts = np.outer(g, alpha)                   # dL/dK_ts
    G_ss = -np.outer(w, alpha)                  # dL/dK_ss
    K_ss = gram(X_s, X_s, spec) if spec.kind == "rbf" else None
    # X_s enters K_ss through both arguments; k is symmetric so both paths fold into G + G^T
    dX = (_gram_grad_b(X_t, X_s, G_ts, spec, K_ts)
          + _gram_grad_b(X_s, X_s, G_ss + G_ss.T, spec, K_ss))
    return dX, w
