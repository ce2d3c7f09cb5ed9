"""Distillation objectives on raw scores Z and their exact gradients.

Kinds: ``mse`` (plain KIP target matching on +-1 labels), ``ce``, ``wce`` (class
re-weighted CE), ``focal`` (single (1 - p)^gamma modulator on both class terms) and
``asig`` (asymmetric focal with a shifted sigmoid link p = sigmoid(Z - G), where
G = alpha_g * ln(IR) + beta_g).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

EPS = 1e-12
KINDS = ("mse", "ce", "wce", "focal", "asig")


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "ce"
    gamma: float = 2.0
    coe: float | None = None
    alpha_w: float | None = None
    alpha_g: float = 0.0
    beta_g: float = 0.0
    ir: float = 1.0
    # "negatives" weights the positive term by N_neg/N; "prose" by N_pos/N_neg
    coe_mode: str = "negatives"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective {self.kind!r}; expected one of {KINDS}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        # coe / alpha_w may stay None until resolve() fills them from class counts
        if self.coe is not None and not 0 < self.coe < 1:
            raise ValueError("coe must lie in (0, 1)")
        if self.alpha_w is not None and not 0 < self.alpha_w < 1:
            raise ValueError("alpha_w must lie in (0, 1)")
        if not self.ir > 0:
            raise ValueError("imbalance ratio must be positive")
        if self.coe_mode not in ("negatives", "prose"):
            raise ValueError(f"unknown coe_mode {self.coe_mode!r}")

    @property
    def shift(self) -> float:
        return g_shift(self.ir, self.alpha_g, self.beta_g) if self.kind == "asig" else 0.0


def class_weight(n_pos: int, n_neg: int, mode: str = "negatives") -> float:
    """Weight on the positive term. Default is the fraction of negatives, which up-weights a
    rare positive class; ``prose`` gives N_pos / N_neg, clipped into (0, 1)."""
    if mode == "negatives":
        return n_neg / (n_pos + n_neg)
    r = n_pos / n_neg
    return float(min(max(r, 1e-6), 1 - 1e-6))


def resolve(spec: ObjectiveSpec, n_pos: int, n_neg: int) -> ObjectiveSpec:
    """Fill data-dependent defaults (coe, alpha_w, ir) from class counts."""
    upd = {}
    coe = spec.coe
    if coe is None:
        coe = class_weight(n_pos, n_neg, spec.coe_mode)
        if spec.kind == "wce":
            upd["coe"] = coe
    if spec.kind == "asig":
        if spec.alpha_w is None:
            upd["alpha_w"] = coe
        upd["ir"] = max(n_pos, n_neg) / min(n_pos, n_neg)
    return replace(spec, **upd) if upd else spec


def g_shift(ir: float, alpha_g: float, beta_g: float) -> float:
    if not ir > 0:
        raise ValueError("imbalance ratio must be positive")
    return alpha_g * math.log(ir) + beta_g


def shifted_sigmoid(Z, G: float = 0.0) -> np.ndarray:
    return expit(np.asarray(Z, dtype=float) - G)


def _log_sigmoid(u: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -u)


def loss_and_grad(spec: ObjectiveSpec, Z, y_t, y_enc=None) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient with respect to Z."""
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y_t, dtype=float)
    n = Z.shape[0]
    if n < 1 or y.shape != Z.shape:
        raise ValueError("scores and labels must be equal-length, nonempty vectors")

    if spec.kind == "mse":
        t = 2.0 * y - 1.0 if y_enc is None else np.asarray(y_enc, dtype=float)
        if t.shape != Z.shape:
            raise ValueError("y_enc length mismatch")
        r = Z - t
        return float(np.mean(r * r)), 2.0 * r / n

    if spec.kind == "wce" and spec.coe is None:
        raise ValueError("wce objective has no coe; resolve() it against class counts")
    if spec.kind == "asig" and spec.alpha_w is None:
        raise ValueError("asig objective has no alpha_w; resolve() it against class counts")

    u = Z - spec.shift
    p, q = expit(u), expit(-u)
    dpq = p * q
    # clamp probabilities to [EPS, 1 - EPS]; clamped entries carry no gradient
    lo, hi = math.log(EPS), math.log1p(-EPS)
    lp_raw, lq_raw = _log_sigmoid(u), _log_sigmoid(-u)
    lp, lq = np.clip(lp_raw, lo, hi), np.clip(lq_raw, lo, hi)
    in_p = (lp_raw > lo) & (lp_raw < hi)
    in_q = (lq_raw > lo) & (lq_raw < hi)
    P, Q = np.exp(lp), np.exp(lq)
    dP = np.where(in_p, dpq, 0.0)
    dQ = np.where(in_q, -dpq, 0.0)
    dlp = np.where(in_p, q, 0.0)
    dlq = np.where(in_q, -p, 0.0)

    gam = spec.gamma
    one = np.ones_like(Z)
    zero = np.zeros_like(Z)
    if spec.kind == "ce":
        w_pos, w_neg = 1.0, 1.0
        m_pos, dm_pos, m_neg, dm_neg = one, zero, one, zero
    elif spec.kind == "wce":
        w_pos, w_neg = spec.coe, 1.0 - spec.coe
        m_pos, dm_pos, m_neg, dm_neg = one, zero, one, zero
    elif spec.kind == "focal":
        w_pos, w_neg = 1.0, 1.0
        m_pos = Q**gam
        dm_pos = gam * Q ** (gam - 1.0) * dQ if gam else zero
        m_neg, dm_neg = m_pos, dm_pos
    else:
        w_pos, w_neg = spec.alpha_w, 1.0 - spec.alpha_w
        m_pos = Q**gam
        dm_pos = gam * Q ** (gam - 1.0) * dQ if gam else zero
        m_neg = P**gam
        dm_neg = gam * P ** (gam - 1.0) * dP if gam else zero

    pos_term = w_pos * y * m_pos * lp
    neg_term = w_neg * (1.0 - y) * m_neg * lq
    loss = -float(np.sum(pos_term + neg_term)) / n
    grad = -(w_pos * y * (dm_pos * lp + m_pos * dlp)
             + w_neg * (1.0 - y) * (dm_neg * lq + m_neg * dlq)) / n
    return loss, grad


def _score_pair(train, val, kernel, alpha_g, beta_g, cell_seed, m, epochs, gamma, lam):
    from .distiller import DistillConfig, distill
    from .evaluator import ClassifierSpec, auc, predict_proba, train_classifier

    cfg = DistillConfig(m=min(m, train.n - 1), epochs=epochs, lam=lam, seed=cell_seed,
                        kernel=kernel,
                        objective=ObjectiveSpec("asig", gamma=gamma, alpha_g=alpha_g,
                                                beta_g=beta_g))
    coreset, _ = distill(train, cfg)
    model = train_classifier(ClassifierSpec("krr", lam=lam, kernel=kernel), coreset)
    return auc(predict_proba(model, val.features), val.labels)


def _score_star(args):
    return _score_pair(*args)


def calibrate_g(baseline, grid_alpha, grid_beta, seed: int = 0, *, m: int = 20,
                epochs: int = 20, val_fraction: float = 0.2, gamma: float = 2.0,
                lam: float = 1e-6, jobs: int = 1):
    """Grid search for the (alpha_g, beta_g) pair of the asig shift.

    Each pair runs a short asig distillation on a stratified train split of ``baseline``
    and is scored by validation AUC of a KRR classifier fit on the coreset. Ties go to the
    smaller |alpha_g|, then the smaller |beta_g|. Returns ``(alpha_g, beta_g, rows)`` with
    one row per grid pair in row-major order.
    """
    from .kernel_ridge import KernelSpec, median_bandwidth
    from .tabular_data import SplitSpec, split

    grid_alpha, grid_beta = [float(a) for a in grid_alpha], [float(b) for b in grid_beta]
    if not grid_alpha or not grid_beta:
        raise ValueError("calibration grids must be nonempty")
    train, val = split(baseline, SplitSpec(val_fraction, True, seed))
    kernel = KernelSpec("rbf", median_bandwidth(train.features, seed))

    cells = [(ai, bi) for ai in range(len(grid_alpha)) for bi in range(len(grid_beta))]
    jobs_args = [
        (train, val, kernel, grid_alpha[ai], grid_beta[bi],
         int(np.random.SeedSequence([seed, ai, bi]).generate_state(1)[0]),
         m, epochs, gamma, lam)
        for ai, bi in cells
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            scores = list(ex.map(_score_star, jobs_args))
    else:
        scores = [_score_star(a) for a in jobs_args]
    rows = [{"alpha_g": grid_alpha[ai], "beta_g": grid_beta[bi], "val_auc": float(s)}
            for (ai, bi), s in zip(cells, scores)]
    best = min(rows, key=lambda r: (-r["val_auc"], abs(r["alpha_g"]), abs(r["beta_g"])))
    return best["alpha_g"], best["beta_g"], rows
