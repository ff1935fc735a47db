"""Dense feed-forward training core: manual forward/backward, Adam, dropout.

The network topology is fixed: a stack of affine+ReLU layers (the backbone)
followed by a single affine classification head.  A second affine+ReLU stack
(the pre-training head) can be attached for contrastive pre-training.

Dropout uses the inverted convention: masks carry multipliers in {0, 1/keep}
so the no-dropout forward needs no rescaling.  Monte-Carlo inference masks
are per-unit (one thinned network per mask), training masks are per-example.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class LayerParams:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)

    def copy(self) -> "LayerParams":
        return LayerParams(self.W.copy(), self.b.copy())


@dataclass(frozen=True)
class NetConfig:
    backbone_layers: int = 5
    hidden_units: int = 256
    pretrain_head_layers: int = 2
    dropout_rate: float = 0.0
    n_classes: int = 2
    dtype: str = "float32"

    def __post_init__(self):
        if self.backbone_layers < 1 or self.pretrain_head_layers < 1:
            raise ValueError("layer counts must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("learning_rate and batch_size must be positive")


@dataclass
class ModelBundle:
    backbone: list[LayerParams]
    class_head: LayerParams
    pretrain_head: list[LayerParams] | None = None
    dropout_rate: float = 0.0  # rate the bundle was trained with

    def copy(self) -> "ModelBundle":
        return ModelBundle(
            backbone=[l.copy() for l in self.backbone],
            class_head=self.class_head.copy(),
            pretrain_head=(
                [l.copy() for l in self.pretrain_head]
                if self.pretrain_head is not None
                else None
            ),
            dropout_rate=self.dropout_rate,
        )

    @property
    def input_dim(self) -> int:
        return self.backbone[0].W.shape[0]

    @property
    def penultimate_dim(self) -> int:
        return self.backbone[-1].W.shape[1]

    @property
    def n_classes(self) -> int:
        return self.class_head.W.shape[1]


@dataclass
class Gradients:
    backbone: list[LayerParams]
    class_head: LayerParams | None = None
    pretrain_head: list[LayerParams] | None = None


@dataclass
class ForwardResult:
    logits: np.ndarray
    penultimate: np.ndarray


def init_model(input_dim: int, cfg: NetConfig, rng: np.random.Generator,
               with_pretrain_head: bool = False) -> ModelBundle:
    """He-style uniform fan-in initialization; biases start at zero."""
    dtype = np.dtype(cfg.dtype)

    def layer(fan_in, fan_out):
        limit = np.sqrt(6.0 / fan_in)
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
        return LayerParams(W, np.zeros(fan_out, dtype=dtype))

    dims = [input_dim] + [cfg.hidden_units] * cfg.backbone_layers
    backbone = [layer(dims[i], dims[i + 1]) for i in range(cfg.backbone_layers)]
    class_head = layer(cfg.hidden_units, cfg.n_classes)
    pretrain_head = None
    if with_pretrain_head:
        pretrain_head = [
            layer(cfg.hidden_units, cfg.hidden_units)
            for _ in range(cfg.pretrain_head_layers)
        ]
    return ModelBundle(backbone, class_head, pretrain_head, dropout_rate=cfg.dropout_rate)


def stack_forward(layers: list[LayerParams], X: np.ndarray,
                  masks: list[np.ndarray] | None = None):
    """Run an affine+ReLU stack, returning the output and per-layer caches."""
    if X.shape[1] != layers[0].W.shape[0]:
        raise ValueError(
            f"input has {X.shape[1]} features, layer expects {layers[0].W.shape[0]}"
        )
    if masks is not None and len(masks) != len(layers):
        raise ValueError(f"got {len(masks)} dropout masks for {len(layers)} layers")
    h = X
    caches = []
    for i, layer in enumerate(layers):
        z = h @ layer.W + layer.b
        a = np.maximum(z, 0.0)
        m = None
        if masks is not None:
            m = masks[i]
            if m.shape[-1] != a.shape[-1]:
                raise ValueError(
                    f"mask {i} has width {m.shape[-1]}, layer emits {a.shape[-1]}"
                )
            a = a * m
        caches.append((h, z, m))
        h = a
    return h, caches


def stack_backward(layers: list[LayerParams], caches, dout: np.ndarray):
    """Backpropagate through an affine+ReLU stack; returns grads and dX."""
    grads = [None] * len(layers)
    da = dout
    for i in reversed(range(len(layers))):
        h_in, z, m = caches[i]
        if m is not None:
            da = da * m
        dz = da * (z > 0)
        grads[i] = LayerParams(h_in.T @ dz, dz.sum(axis=0))
        da = dz @ layers[i].W.T
    return grads, da


def forward(model: ModelBundle, X: np.ndarray,
            dropout_mask: list[np.ndarray] | None = None) -> ForwardResult:
    """Compute logits and the penultimate (last backbone) activations."""
    X = np.atleast_2d(X)
    penult, _ = stack_forward(model.backbone, X, dropout_mask)
    logits = penult @ model.class_head.W + model.class_head.b
    return ForwardResult(logits=logits, penultimate=penult)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: np.ndarray, y: np.ndarray):
    """Mean cross-entropy of the softmax and its gradient w.r.t. the logits."""
    logits = np.atleast_2d(logits)
    y = np.asarray(y)
    if logits.shape[0] != y.shape[0]:
        raise ValueError("logits and labels disagree on row count")
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = float(-logp[np.arange(n), y].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, dlogits


def _loss_and_grads(model: ModelBundle, X: np.ndarray, y: np.ndarray,
                    dropout_mask: list[np.ndarray] | None = None):
    penult, caches = stack_forward(model.backbone, X, dropout_mask)
    logits = penult @ model.class_head.W + model.class_head.b
    loss, dlogits = softmax_xent(logits, y)
    head_grad = LayerParams(penult.T @ dlogits, dlogits.sum(axis=0))
    dpenult = dlogits @ model.class_head.W.T
    backbone_grads, _ = stack_backward(model.backbone, caches, dpenult)
    return loss, Gradients(backbone=backbone_grads, class_head=head_grad)


def backward(model: ModelBundle, X: np.ndarray, y: np.ndarray,
             dropout_mask: list[np.ndarray] | None = None) -> Gradients:
    """Gradients of the mean cross-entropy for every backbone/head parameter."""
    _, grads = _loss_and_grads(model, np.atleast_2d(X), y, dropout_mask)
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, t: int, cfg: TrainConfig):
    """One bias-corrected Adam update; pure (returns new params and state)."""
    if t < 1:
        raise ValueError("Adam step index t must be >= 1")
    new_params, new_m, new_v = [], [], []
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g)
        update = cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        new_params.append(p - update)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(m=new_m, v=new_v)


def _flatten_layers(layer_lists: list[list[LayerParams]]) -> list[np.ndarray]:
    out = []
    for layers in layer_lists:
        for layer in layers:
            out.append(layer.W)
            out.append(layer.b)
    return out


def _write_back(layer_lists: list[list[LayerParams]], arrays: list[np.ndarray]):
    it = iter(arrays)
    for layers in layer_lists:
        for layer in layers:
            layer.W = next(it)
            layer.b = next(it)


def _sample_batch_masks(model: ModelBundle, n_rows: int, rate: float,
                        rng: np.random.Generator) -> list[np.ndarray]:
    keep = 1.0 - rate
    dtype = model.backbone[0].W.dtype
    return [
        (rng.random((n_rows, layer.W.shape[1])) < keep).astype(dtype) / keep
        for layer in model.backbone
    ]


def sample_mc_masks(model: ModelBundle, n_masks: int,
                    rng: np.random.Generator) -> list[list[np.ndarray]]:
    """Per-unit inference masks, one thinned network per mask."""
    if model.dropout_rate <= 0.0:
        raise ValueError("model was trained without dropout; MC masks unavailable")
    keep = 1.0 - model.dropout_rate
    dtype = model.backbone[0].W.dtype
    masks = []
    for _ in range(n_masks):
        masks.append([
            (rng.random(layer.W.shape[1]) < keep).astype(dtype) / keep
            for layer in model.backbone
        ])
    return masks


def train_supervised(model: ModelBundle, X: np.ndarray, y: np.ndarray,
                     cfg: TrainConfig, dropout_rate: float = 0.0,
                     loss_log: list[float] | None = None) -> ModelBundle:
    """Train a copy of `model` with Adam on shuffled mini-batches.

    Mini-batch order is reseeded per epoch from the seed stream in `cfg`;
    the final partial batch is kept.  Dropout (if any) is applied to every
    backbone activation during training only.  `loss_log`, when given,
    receives one mean mini-batch loss per epoch.
    """
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise ValueError("empty training view")
    if cfg.epochs < 1:
        raise ValueError("epochs must be >= 1")
    dtype = model.backbone[0].W.dtype
    X = np.ascontiguousarray(X, dtype=dtype)
    y = np.asarray(y, dtype=np.int64)

    model = model.copy()
    model.dropout_rate = dropout_rate
    trained = [model.backbone, [model.class_head]]
    params = _flatten_layers(trained)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(cfg.rng_seed)
    n = X.shape[0]
    t = 0
    for _ in range(cfg.epochs):
        epoch_rng = np.random.default_rng(rng.integers(2**63))
        order = epoch_rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            masks = None
            if dropout_rate > 0.0:
                masks = _sample_batch_masks(model, len(batch), dropout_rate, epoch_rng)
            loss, g = _loss_and_grads(model, X[batch], y[batch], masks)
            batch_losses.append(loss)
            grads = _flatten_layers([g.backbone, [g.class_head]])
            t += 1
            params, state = adam_step(params, grads, state, t, cfg)
            _write_back(trained, params)
        if loss_log is not None:
            loss_log.append(float(np.mean(batch_losses)))
    return model


def predict_proba(model: ModelBundle, X: np.ndarray,
                  mc_masks: list[list[np.ndarray]] | None = None) -> np.ndarray:
    """Class probabilities; with masks, one probability matrix per mask."""
    X = np.atleast_2d(X)
    if mc_masks is None:
        return softmax(forward(model, X).logits)
    if model.dropout_rate <= 0.0:
        raise ValueError("MC predictions requested on a model trained without dropout")
    return np.stack([softmax(forward(model, X, m).logits) for m in mc_masks])


CHECKPOINT_MAGIC = b"ALBN"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None):
    """Shape-tagged binary tensor dump (little-endian float64 payload)."""
    header = {
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "tensors": [
            {"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)}
            for name, arr in tensors.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header['version']}")
        tensors = {}
        for spec in header["tensors"]:
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            raw = np.frombuffer(fh.read(8 * count), dtype="<f8")
            tensors[spec["name"]] = raw.reshape(spec["shape"]).astype(spec["dtype"])
    return tensors, header["meta"]


def _layer_tensors(prefix: str, layers: list[LayerParams]) -> dict[str, np.ndarray]:
    out = {}
    for i, layer in enumerate(layers):
        out[f"{prefix}.{i}.W"] = layer.W
        out[f"{prefix}.{i}.b"] = layer.b
    return out


def save_backbone(path, layers: list[LayerParams], meta: dict | None = None):
    save_checkpoint(path, _layer_tensors("backbone", layers), meta)


def load_backbone(path) -> list[LayerParams]:
    tensors, _ = load_checkpoint(path)
    n = max(int(k.split(".")[1]) for k in tensors) + 1
    return [
        LayerParams(tensors[f"backbone.{i}.W"], tensors[f"backbone.{i}.b"])
        for i in range(n)
    ]
