"""KIP-style coreset distillation with pluggable objectives.

The coreset (X_s, y_s) is the parameter set. Each step fits KRR on the coreset, scores a
batch of real training rows, evaluates the objective on those scores and pushes the
gradient back through the KRR solve to update the coreset with Adam.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .kernel_ridge import KernelSpec, krr_backward, krr_fit, krr_predict, median_bandwidth
from .objectives import ObjectiveSpec, loss_and_grad, resolve
from .tabular_data import DataError, Dataset, Standardization, imbalance_ratio

log = logging.getLogger(__name__)

DEFAULT_SIZES = (10, 20, 30, 50, 100, 200, 300, 500, 700, 900)
LABEL_CLAMP = 10.0


class DistillationError(ArithmeticError):
    """Numerical failure during distillation; carries the trace up to the failing step."""

    def __init__(self, msg, step, trace):
        super().__init__(msg)
        self.step = step
        self.trace = trace


@dataclass(frozen=True)
class DistillConfig:
    m: int = 100
    epochs: int = 100
    lr_x: float = 0.01
    lr_y: float = 0.005
    batch_size: int | None = None
    learn_labels: bool = True
    init: str = "subsample"
    noise_sigma: float = 0.1
    synthetic_ir: float | str = "match"
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    kernel: KernelSpec | None = None  # None: rbf with the median-distance bandwidth
    lam: float = 1e-6
    seed: int = 0
    snapshot_every: int | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("coreset size m must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (self.lr_x > 0 and self.lr_y > 0):
            raise ValueError("learning rates must be positive")
        if not self.lam > 0:
            raise ValueError("ridge lam must be positive")
        if self.init not in ("subsample", "subsample_noise", "gaussian"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.synthetic_ir != "match" and not float(self.synthetic_ir) >= 1:
            raise ValueError("synthetic_ir must be 'match' or a real >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SyntheticSet:
    X_s: np.ndarray
    y_s: np.ndarray
    y_class: np.ndarray
    feature_names: tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return self.X_s.shape[0]

    @property
    def d(self) -> int:
        return self.X_s.shape[1]


@dataclass
class DistillTrace:
    epoch: list = field(default_factory=list)
    step: list = field(default_factory=list)
    batch_loss: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (step, full-target loss)

    def record(self, epoch, step, loss):
        self.epoch.append(epoch)
        self.step.append(step)
        self.batch_loss.append(loss)

    @property
    def final_loss(self) -> float | None:
        return self.batch_loss[-1] if self.batch_loss else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "step", "loss"])
        for e, s, l in zip(self.epoch, self.step, self.batch_loss):
            w.writerow([e, s, _io.fmt(l)])
        return buf.getvalue()


# --- Adam -----------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    t: int
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls(0, np.zeros_like(params, dtype=float), np.zeros_like(params, dtype=float))


def adam_update(state: AdamState, params, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, "
                         f"state {state.m.shape}")
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grads
    v = beta2 * state.v + (1 - beta2) * grads * grads
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    return AdamState(t, m, v), params - lr * m_hat / (np.sqrt(v_hat) + eps)


# --- initialization -------------------------------------------------------------------

def _positive_count(train: Dataset, cfg: DistillConfig) -> int:
    if cfg.synthetic_ir == "match":
        k = int(round(cfg.m * train.n_pos / train.n))
    else:
        k = int(round(cfg.m / (1.0 + float(cfg.synthetic_ir))))
    return min(max(1, k), cfg.m - 1)


def init_synthetic(train: Dataset, cfg: DistillConfig, rng=None) -> SyntheticSet:
    if cfg.m < 2:
        raise DataError("coreset needs m >= 2 to hold both classes")
    if cfg.m > train.n:
        raise DataError(f"coreset size {cfg.m} exceeds training rows {train.n}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    k_pos = _positive_count(train, cfg)
    k_neg = cfg.m - k_pos
    y_class = np.concatenate([np.ones(k_pos, dtype=np.int64), np.zeros(k_neg, dtype=np.int64)])
    if cfg.init == "gaussian":
        X = rng.standard_normal((cfg.m, train.d))
    else:
        pos = np.flatnonzero(train.labels == 1)
        neg = np.flatnonzero(train.labels == 0)
        if k_pos > pos.size or k_neg > neg.size:
            raise DataError(f"cannot subsample {k_pos}/{k_neg} rows from class sizes "
                            f"{pos.size}/{neg.size}")
        idx = np.concatenate([rng.permutation(pos)[:k_pos], rng.permutation(neg)[:k_neg]])
        X = train.features[idx].copy()
        if cfg.init == "subsample_noise":
            X += cfg.noise_sigma * rng.standard_normal(X.shape)
    y_s = 2.0 * y_class - 1.0
    return SyntheticSet(X, y_s, y_class, train.feature_names)


# --- the optimization loop ------------------------------------------------------------

def resolve_kernel(train: Dataset, cfg: DistillConfig) -> KernelSpec:
    if cfg.kernel is not None:
        return cfg.kernel
    return KernelSpec("rbf", median_bandwidth(train.features, cfg.seed))


def target_loss(coreset: SyntheticSet, data: Dataset, objective: ObjectiveSpec,
                kernel: KernelSpec, lam: float) -> float:
    model = krr_fit(coreset.X_s, coreset.y_s, lam, kernel)
    Z = krr_predict(model, data.features)
    return loss_and_grad(objective, Z, data.labels)[0]


def distill(train: Dataset, cfg: DistillConfig) -> tuple[SyntheticSet, DistillTrace]:
    """Optimize a coreset of ``cfg.m`` points against ``train``.

    Raises DistillationError on a non-finite loss/gradient or a failed kernel solve.
    """
    init_seq, shuffle_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    coreset = init_synthetic(train, cfg, np.random.default_rng(init_seq))
    kernel = resolve_kernel(train, cfg)
    objective = resolve(cfg.objective, train.n_pos, train.n_neg)
    rng = np.random.default_rng(shuffle_seq)
    bs = cfg.batch_size or min(1024, train.n)
    X, y = train.features, train.labels

    Xs, ys = coreset.X_s.copy(), coreset.y_s.copy()
    sx, sy = AdamState.zeros_like(Xs), AdamState.zeros_like(ys)
    trace = DistillTrace()

    def snapshot(step):
        cur = SyntheticSet(Xs, ys, coreset.y_class)
        trace.snapshots.append((step, target_loss(cur, train, objective, kernel, cfg.lam)))

    step = 0
    if cfg.snapshot_every:
        snapshot(0)
    try:
        for epoch in range(cfg.epochs):
            perm = rng.permutation(train.n)
            for start in range(0, train.n, bs):
                idx = perm[start:start + bs]
                Xb = X[idx]
                model = krr_fit(Xs, ys, cfg.lam, kernel)
                Z = krr_predict(model, Xb)
                loss, gZ = loss_and_grad(objective, Z, y[idx])
                if not np.isfinite(loss) or not np.all(np.isfinite(gZ)):
                    raise DistillationError(f"non-finite loss at step {step}", step, trace)
                dX, dy = krr_backward(Xs, ys, Xb, cfg.lam, kernel, gZ, model=model)
                if not (np.all(np.isfinite(dX)) and np.all(np.isfinite(dy))):
                    raise DistillationError(f"non-finite gradient at step {step}", step, trace)
                trace.record(epoch, step, loss)
                sx, Xs = adam_update(sx, Xs, dX, cfg.lr_x)
                if cfg.learn_labels:
                    sy, ys = adam_update(sy, ys, dy, cfg.lr_y)
                    np.clip(ys, -LABEL_CLAMP, LABEL_CLAMP, out=ys)
                step += 1
                if not np.all(np.isfinite(Xs)):
                    raise DistillationError(f"non-finite coreset after step {step - 1}",
                                            step - 1, trace)
                if cfg.snapshot_every and step % cfg.snapshot_every == 0:
                    snapshot(step)
            log.debug("epoch %d: last batch loss %.6g", epoch, trace.final_loss)
    except ArithmeticError as exc:
        if isinstance(exc, DistillationError):
            raise
        raise DistillationError(f"kernel solve failed at step {step}: {exc}", step, trace) from exc
    return SyntheticSet(Xs, ys, coreset.y_class, train.feature_names), trace


# --- export ---------------------------------------------------------------------------

def coreset_csv(s: SyntheticSet, std: Standardization | None) -> str:
    X = s.X_s if std is None else std.invert(s.X_s)
    names = list(s.feature_names) or [f"x{i}" for i in range(s.d)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names + ["y_class", "y_s"])
    for row, c, t in zip(X, s.y_class, s.y_s):
        w.writerow([_io.fmt(v) for v in row] + [int(c), _io.fmt(t)])
    return buf.getvalue()


def coreset_sidecar(s: SyntheticSet, std: Standardization | None, cfg: DistillConfig | None,
                    final_loss: float | None, train: Dataset | None) -> dict:
    return {
        "m": s.m,
        "d": s.d,
        "feature_names": list(s.feature_names),
        "class_counts": {"positive": int(s.y_class.sum()),
                         "negative": int(s.m - s.y_class.sum())},
        "config": None if cfg is None else cfg.to_dict(),
        "final_loss": final_loss,
        "standardization": None if std is None else std.to_dict(),
        "train_hash": None if train is None else _io.array_hash(train.features, train.labels),
    }


def export_coreset(s: SyntheticSet, std: Standardization | None, path, cfg=None,
                   final_loss=None, train=None) -> None:
    """Write ``path`` (CSV in original units) and ``path`` with a .json sidecar."""
    if std is not None and std.mean.shape != (s.d,):
        raise ValueError("standardization width does not match coreset")
    path = Path(path)
    _io.atomic_write_text(path, coreset_csv(s, std))
    _io.atomic_write_text(path.with_suffix(".json"),
                          _io.dumps(coreset_sidecar(s, std, cfg, final_loss, train)))


def read_coreset(path) -> SyntheticSet:
    """Load an exported coreset CSV; X_s comes back in the file's (original) units."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"coreset file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-2:] != ["y_class", "y_s"]:
        raise DataError(f"{path}: not a coreset CSV (needs trailing y_class, y_s columns)")
    names = rows[0][:-2]
    try:
        body = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: unparseable cell ({exc})") from None
    body = body.reshape(len(rows) - 1, len(rows[0]))
    return SyntheticSet(body[:, :-2], body[:, -1], body[:, -2].astype(np.int64), tuple(names))
