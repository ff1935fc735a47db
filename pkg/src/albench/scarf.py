"""Contrastive pre-training of the backbone via random feature corruption.

Corruption happens in raw feature space: a random subset of feature indices
is resampled from each feature's empirical marginal, and categorical swaps
are re-one-hotted by the table encoder.  The loss pulls each example toward
its corrupted view against the corrupted views of the rest of the batch.
Labels never enter this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import TableEncoder
from .net import (
    AdamState,
    LayerParams,
    ModelBundle,
    TrainConfig,
    _flatten_layers,
    _write_back,
    adam_step,
    stack_backward,
    stack_forward,
)

TYPICALITY_EPS = 1e-12


@dataclass(frozen=True)
class CorruptionConfig:
    corrupt_fraction: float = 0.6
    temperature: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.corrupt_fraction <= 1.0:
            raise ValueError("corrupt_fraction must be in [0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class PretrainConfig:
    max_epochs: int = 1000
    patience: int = 3
    val_epochs_frozen: int = 20
    corruption: CorruptionConfig = field(default_factory=CorruptionConfig)

    def __post_init__(self):
        if self.patience < 1 or self.max_epochs < 1 or self.val_epochs_frozen < 1:
            raise ValueError("patience, max_epochs, val_epochs_frozen must be >= 1")


@dataclass(frozen=True)
class MarginalSampler:
    """Empirical per-feature value pools drawn from the pre-training data."""

    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        for j, vals in enumerate(self.values):
            if vals.size == 0:
                raise ValueError(f"feature {j} has an empty value pool")

    @classmethod
    def fit(cls, raw: np.ndarray) -> "MarginalSampler":
        raw = np.atleast_2d(raw)
        return cls(tuple(raw[:, j].copy() for j in range(raw.shape[1])))

    def resample_matrix(self, n_rows: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((n_rows, len(self.values)))
        for j, vals in enumerate(self.values):
            out[:, j] = vals[rng.integers(0, vals.size, size=n_rows)]
        return out


def corrupt(x: np.ndarray, sampler: MarginalSampler, fraction: float,
            rng: np.random.Generator) -> np.ndarray:
    """Resample ceil(fraction * n_features) feature indices per row.

    Indices are chosen uniformly without replacement, independently per row;
    replacement values come from the feature's empirical marginal.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, d = x.shape
    n_corrupt = math.ceil(fraction * d)
    if n_corrupt == 0:
        return x[0].copy() if single else x.copy()
    # argsort of iid uniforms = a uniform random permutation per row
    ranks = np.argsort(rng.random((n, d)), axis=1)
    mask = np.zeros((n, d), dtype=bool)
    np.put_along_axis(mask, ranks[:, :n_corrupt], True, axis=1)
    replacements = sampler.resample_matrix(n, rng)
    out = np.where(mask, replacements, x)
    return out[0] if single else out


def _normalize_with_grad(Z: np.ndarray):
    norms = np.linalg.norm(Z, axis=1)
    if (norms == 0).any():
        raise ValueError("zero-norm embedding row")
    return Z / norms[:, None], norms


def info_nce_loss(Z1: np.ndarray, Z2: np.ndarray, tau: float = 1.0) -> float:
    """Cosine NT-Xent: softmax over sim(z_i, corrupted z_j)/tau, target j=i."""
    loss, _, _ = info_nce_grad(Z1, Z2, tau)
    return loss


def info_nce_grad(Z1: np.ndarray, Z2: np.ndarray, tau: float = 1.0):
    Z1 = np.atleast_2d(Z1)
    Z2 = np.atleast_2d(Z2)
    if Z1.shape != Z2.shape:
        raise ValueError("view embeddings must have identical shapes")
    n = Z1.shape[0]
    if n < 2:
        raise ValueError("contrastive loss needs a batch of at least 2")
    U, norms1 = _normalize_with_grad(Z1)
    V, norms2 = _normalize_with_grad(Z2)
    S = (U @ V.T) / tau
    S_shift = S - S.max(axis=1, keepdims=True)
    P = np.exp(S_shift)
    P /= P.sum(axis=1, keepdims=True)
    idx = np.arange(n)
    loss = float(-np.log(np.maximum(P[idx, idx], 1e-300)).mean())
    dS = P.copy()
    dS[idx, idx] -= 1.0
    dS /= n * tau
    dU = dS @ V
    dV = dS.T @ U
    dZ1 = (dU - (dU * U).sum(axis=1, keepdims=True) * U) / norms1[:, None]
    dZ2 = (dV - (dV * V).sum(axis=1, keepdims=True) * V) / norms2[:, None]
    return loss, dZ1, dZ2


def embeddings(backbone: list[LayerParams], X: np.ndarray) -> np.ndarray:
    """L2-normalized penultimate activations (cosine-ready embedding space)."""
    out, _ = stack_forward(backbone, np.atleast_2d(X))
    out = np.asarray(out, dtype=np.float64)
    norms = np.linalg.norm(out, axis=1)
    dead = norms == 0
    if dead.any():
        # fully dead ReLU rows: park them on a fixed unit direction
        out[dead, 0] = 1.0
        norms[dead] = 1.0
    return out / norms[:, None]


@dataclass
class PretrainResult:
    backbone: list[LayerParams]
    history: list[tuple[float, float]]  # (train loss, validation loss) per epoch
    best_epoch: int  # index into history with minimal validation loss
    epochs_run: int


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        stop = min(start + size, n)
        if stop - start >= 2:  # contrastive batches need >= 2 rows
            yield np.arange(start, stop)


def pretrain(model: ModelBundle, raw_pool: np.ndarray, encoder: TableEncoder,
             cfg: PretrainConfig, train_cfg: TrainConfig,
             rng: np.random.Generator) -> PretrainResult:
    """Contrastive pre-training with early stopping on a static corrupted bank.

    `raw_pool` holds the raw features of the train split only.  The split
    into a 7/8 training slice and 1/8 validation slice mirrors the 70%/10%
    fractions of the full dataset.  The validation bank is generated once:
    `val_epochs_frozen` independently corrupted copies of the validation
    slice.  Dropout is never applied here.
    """
    if model.pretrain_head is None:
        raise ValueError("model has no pre-training head attached")
    raw_pool = np.atleast_2d(raw_pool)
    n = raw_pool.shape[0]
    if n < 10:
        raise ValueError(f"pre-training pool too small ({n} rows, need >= 10)")

    model = model.copy()
    dtype = model.backbone[0].W.dtype
    fraction = cfg.corruption.corrupt_fraction
    tau = cfg.corruption.temperature

    perm = rng.permutation(n)
    val_n = max(2, int(round(n / 8)))
    val_rows = raw_pool[perm[:val_n]]
    train_rows = raw_pool[perm[val_n:]]

    sampler = MarginalSampler.fit(raw_pool)
    X_val = encoder.transform(val_rows).astype(dtype)
    bank = [
        encoder.transform(corrupt(val_rows, sampler, fraction, rng)).astype(dtype)
        for _ in range(cfg.val_epochs_frozen)
    ]
    val_batches = list(_chunks(val_n, train_cfg.batch_size))

    def validation_loss() -> float:
        total, count = 0.0, 0
        for X_tilde in bank:
            for batch in val_batches:
                z1, _ = stack_forward(model.pretrain_head,
                                      stack_forward(model.backbone, X_val[batch])[0])
                z2, _ = stack_forward(model.pretrain_head,
                                      stack_forward(model.backbone, X_tilde[batch])[0])
                total += info_nce_loss(z1, z2, tau)
                count += 1
        return total / count

    trained = [model.backbone, model.pretrain_head]
    params = _flatten_layers(trained)
    state = AdamState.zeros_like(params)
    t = 0
    history: list[tuple[float, float]] = []
    best_val = math.inf
    best_epoch = -1
    best_weights: list[np.ndarray] | None = None
    bad_epochs = 0

    for _ in range(cfg.max_epochs):
        epoch_rng = np.random.default_rng(rng.integers(2**63))
        order = epoch_rng.permutation(train_rows.shape[0])
        epoch_losses = []
        for start in range(0, order.size, train_cfg.batch_size):
            batch = order[start:start + train_cfg.batch_size]
            if batch.size < 2:
                continue
            raw_b = train_rows[batch]
            X1 = encoder.transform(raw_b).astype(dtype)
            X2 = encoder.transform(corrupt(raw_b, sampler, fraction, epoch_rng)).astype(dtype)
            p1, bb_cache1 = stack_forward(model.backbone, X1)
            z1, h_cache1 = stack_forward(model.pretrain_head, p1)
            p2, bb_cache2 = stack_forward(model.backbone, X2)
            z2, h_cache2 = stack_forward(model.pretrain_head, p2)
            loss, dz1, dz2 = info_nce_grad(z1, z2, tau)
            epoch_losses.append(loss)
            hg1, dp1 = stack_backward(model.pretrain_head, h_cache1, dz1)
            hg2, dp2 = stack_backward(model.pretrain_head, h_cache2, dz2)
            bg1, _ = stack_backward(model.backbone, bb_cache1, dp1)
            bg2, _ = stack_backward(model.backbone, bb_cache2, dp2)
            head_g = [LayerParams(a.W + b.W, a.b + b.b) for a, b in zip(hg1, hg2)]
            bb_g = [LayerParams(a.W + b.W, a.b + b.b) for a, b in zip(bg1, bg2)]
            grads = _flatten_layers([bb_g, head_g])
            t += 1
            params, state = adam_step(params, grads, state, t, train_cfg)
            _write_back(trained, params)
        vloss = validation_loss()
        history.append((float(np.mean(epoch_losses)) if epoch_losses else 0.0, vloss))
        if vloss < best_val:
            best_val = vloss
            best_epoch = len(history) - 1
            best_weights = [layer.W.copy() for layer in model.backbone] + [
                layer.b.copy() for layer in model.backbone
            ]
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break

    n_layers = len(model.backbone)
    assert best_weights is not None
    backbone = [
        LayerParams(best_weights[i], best_weights[n_layers + i])
        for i in range(n_layers)
    ]
    return PretrainResult(
        backbone=backbone,
        history=history,
        best_epoch=best_epoch,
        epochs_run=len(history),
    )
