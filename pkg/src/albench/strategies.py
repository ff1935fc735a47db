"""The fifteen acquisition strategies plus the power-noise batch extension.

Every strategy maps an AcquisitionContext to a batch of exactly
min(B, |pool|) distinct pool indices.  All top-k/bottom-k selections break
ties toward the smaller pool index, so selections are reproducible across
platforms given the context and RNG state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cluster

log = logging.getLogger(__name__)

# trainer(train_indices, seed, from_scratch) -> pool probability matrix
TrainerFn = Callable[[np.ndarray, int, bool], np.ndarray]

CLUSTER_MARGIN_M = {"cluster_margin_1.25": 1.25, "cluster_margin_10": 10.0}

STRATEGY_IDS = (
    "random",
    "margin",
    "entropy",
    "least_confident",
    "random_margin",
    "min_margin",
    "typiclust",
    "maxent",
    "bald",
    "coreset",
    "margin_density",
    "cluster_margin_1.25",
    "cluster_margin_10",
    "qbc",
    "power_margin",
    "power_bald",
)

# strategies whose model must be trained with dropout for MC inference
MC_DROPOUT_STRATEGIES = frozenset({"maxent", "bald", "power_bald"})
# strategies that train extra models through the trainer callback
COMMITTEE_STRATEGIES = frozenset({"min_margin", "qbc"})
# strategies that read penultimate embeddings
EMBEDDING_STRATEGIES = frozenset(
    {"coreset", "margin_density", "cluster_margin_1.25", "cluster_margin_10"}
)

COMMITTEE_SIZE = 25  # K for both the bootstrap committee and QBC
MC_SAMPLES = 25  # M dropout masks
MC_DROPOUT_RATE = 0.5
POWER_BETA = 1.0
SCORE_FLOOR = 1e-12  # keeps log() finite for zero power scores
TYPICALITY_EPS = 1e-12


class UnknownStrategyError(ValueError):
    def __init__(self, strategy_id: str):
        super().__init__(
            f"unknown strategy {strategy_id!r}; valid ids: {', '.join(STRATEGY_IDS)}"
        )


@dataclass
class AcquisitionContext:
    """Everything a strategy may consult when choosing the next batch."""

    labeled_idx: np.ndarray  # currently labeled train-split positions
    pool_idx: np.ndarray  # candidate train-split positions
    batch_size: int
    rng: np.random.Generator
    round: int = 0
    probs: np.ndarray | None = None  # (|pool|, C) aligned with pool_idx
    labeled_y: np.ndarray | None = None  # labels of labeled_idx (already acquired)
    mc_probs: np.ndarray | None = None  # (M, |pool|, C)
    penultimate_pool: np.ndarray | None = None
    penultimate_labeled: np.ndarray | None = None
    ssl_embeddings: np.ndarray | None = None  # (n_total, d) over the train split
    trainer: TrainerFn | None = None
    cluster_margin_labels: dict[float, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.labeled_idx = np.asarray(self.labeled_idx, dtype=np.int64)
        self.pool_idx = np.asarray(self.pool_idx, dtype=np.int64)
        if np.intersect1d(self.labeled_idx, self.pool_idx).size:
            raise ValueError("labeled and pool indices overlap")
        if self.probs is not None:
            self.probs = np.atleast_2d(self.probs)
            if self.probs.shape[0] != self.pool_idx.size:
                raise ValueError("probability rows must match the pool size")
            if not np.allclose(self.probs.sum(axis=1), 1.0, atol=1e-6):
                raise ValueError("probability rows must sum to 1")

    @property
    def n_total(self) -> int:
        return self.labeled_idx.size + self.pool_idx.size


@dataclass(frozen=True)
class SelectionResult:
    chosen: np.ndarray  # min(B, |pool|) distinct pool indices
    scores: np.ndarray | None = None  # diagnostic, aligned with the pool


def _pick_smallest(scores: np.ndarray, pool_idx: np.ndarray, b: int) -> np.ndarray:
    order = np.lexsort((pool_idx, scores))
    return pool_idx[order[:b]]


def _pick_largest(scores: np.ndarray, pool_idx: np.ndarray, b: int) -> np.ndarray:
    order = np.lexsort((pool_idx, -np.asarray(scores, dtype=np.float64)))
    return pool_idx[order[:b]]


def score_margin(probs: np.ndarray) -> np.ndarray:
    """Top-1 minus top-2 probability; small margin = uncertain."""
    probs = np.atleast_2d(probs)
    if probs.shape[1] < 2:
        raise ValueError("margin needs at least 2 classes")
    part = np.sort(probs, axis=1)
    return part[:, -1] - part[:, -2]


def _entropy_rows(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1)


def score_entropy(probs: np.ndarray) -> np.ndarray:
    """Natural-log predictive entropy, with 0*log(0) = 0."""
    return _entropy_rows(np.atleast_2d(probs))


def score_lc(probs: np.ndarray) -> np.ndarray:
    """Least-confident score 1 - max class probability."""
    return 1.0 - np.atleast_2d(probs).max(axis=1)


def score_maxent(mc_probs: np.ndarray) -> np.ndarray:
    """Entropy of the mean over the MC-dropout predictive distributions."""
    return _entropy_rows(np.asarray(mc_probs).mean(axis=0))


def score_bald(mc_probs: np.ndarray) -> np.ndarray:
    """Mutual information: entropy of the mean minus mean member entropy."""
    mc_probs = np.asarray(mc_probs)
    h_mean = _entropy_rows(mc_probs.mean(axis=0))
    member_h = np.stack([_entropy_rows(p) for p in mc_probs]).mean(axis=0)
    return h_mean - member_h


def select_random(ctx: AcquisitionContext) -> SelectionResult:
    chosen = ctx.rng.choice(ctx.pool_idx, size=ctx.batch_size, replace=False)
    return SelectionResult(chosen=chosen)


def select_random_margin(ctx: AcquisitionContext) -> SelectionResult:
    """Half the batch by lowest margin (ceil), the rest uniformly at random."""
    margins = score_margin(ctx.probs)
    n_margin = math.ceil(ctx.batch_size / 2)
    by_margin = _pick_smallest(margins, ctx.pool_idx, n_margin)
    rest = np.setdiff1d(ctx.pool_idx, by_margin)
    n_random = ctx.batch_size - n_margin
    random_part = (
        ctx.rng.choice(rest, size=n_random, replace=False)
        if n_random > 0
        else np.empty(0, dtype=np.int64)
    )
    return SelectionResult(
        chosen=np.concatenate([by_margin, random_part]), scores=margins
    )


def _per_class_bootstrap(ctx: AcquisitionContext, n_classes: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Bootstrap the labeled multiset class by class, same size per class."""
    parts = []
    for c in range(n_classes):
        members = ctx.labeled_idx[ctx.labeled_y == c]
        if members.size == 0:
            log.warning("class %d absent from the active set; bootstrap skips it", c)
            continue
        parts.append(rng.choice(members, size=members.size, replace=True))
    return np.concatenate(parts)


def select_min_margin(ctx: AcquisitionContext,
                      committee_size: int = COMMITTEE_SIZE) -> SelectionResult:
    """Minimum margin across models trained on per-class bootstraps."""
    if ctx.trainer is None or ctx.labeled_y is None:
        raise ValueError("min_margin needs a trainer callback and labeled labels")
    n_classes = ctx.probs.shape[1]
    min_margins = np.full(ctx.pool_idx.size, np.inf)
    for _ in range(committee_size):
        multiset = _per_class_bootstrap(ctx, n_classes, ctx.rng)
        seed = int(ctx.rng.integers(2**63))
        member_probs = ctx.trainer(multiset, seed, False)
        min_margins = np.minimum(min_margins, score_margin(member_probs))
    return SelectionResult(
        chosen=_pick_smallest(min_margins, ctx.pool_idx, ctx.batch_size),
        scores=min_margins,
    )


def _typicality(embeddings: np.ndarray, k: int) -> np.ndarray:
    """Inverse mean cosine distance to the k nearest neighbors (per row)."""
    n = embeddings.shape[0]
    if n == 1 or k < 1:
        return np.full(n, 1.0 / TYPICALITY_EPS)
    d = cluster.cosine_distances(embeddings, embeddings)
    np.fill_diagonal(d, np.inf)
    nearest = np.partition(d, k - 1, axis=1)[:, :k]
    return 1.0 / (nearest.mean(axis=1) + TYPICALITY_EPS)


def select_typiclust(ctx: AcquisitionContext) -> SelectionResult:
    """Most typical point from each of the B largest uncovered clusters."""
    if ctx.ssl_embeddings is None:
        raise ValueError("typiclust needs embeddings over all train-split points")
    emb = ctx.ssl_embeddings
    n_clusters = ctx.labeled_idx.size + ctx.batch_size
    seed = int(ctx.rng.integers(2**63))
    assignment = cluster.spherical_kmeans(emb, n_clusters, seed)
    covered = set(assignment.labels[ctx.labeled_idx].tolist())
    uncovered = [c for c in range(n_clusters) if c not in covered]
    uncovered.sort(key=lambda c: (-assignment.sizes[c], c))

    chosen: list[int] = []
    leftovers: list[tuple[float, int]] = []  # (-typicality, index) for refill
    for cid in uncovered[: ctx.batch_size]:
        members = ctx.pool_idx[assignment.labels[ctx.pool_idx] == cid]
        if members.size == 0:
            continue
        cluster_size = int(assignment.sizes[cid])
        k = min(ctx.n_total, max(20, cluster_size))
        k = min(k, members.size - 1)
        typ = _typicality(emb[members], k)
        order = np.lexsort((members, -typ))
        chosen.append(int(members[order[0]]))
        leftovers.extend((-typ[i], int(members[i])) for i in order[1:])

    if len(chosen) < ctx.batch_size:
        # fewer usable uncovered clusters than B: refill with the next most
        # typical candidates from the clusters already used
        log.warning("typiclust found %d uncovered clusters for batch %d",
                    len(chosen), ctx.batch_size)
        for _, idx in sorted(leftovers):
            if len(chosen) >= ctx.batch_size:
                break
            if idx not in chosen:
                chosen.append(idx)
    return SelectionResult(chosen=np.array(chosen[: ctx.batch_size], dtype=np.int64))


def select_coreset(ctx: AcquisitionContext) -> SelectionResult:
    """Greedy k-center growth in Euclidean penultimate space."""
    if ctx.penultimate_pool is None or ctx.penultimate_labeled is None:
        raise ValueError("coreset needs pool and labeled embeddings")
    pool_emb = np.asarray(ctx.penultimate_pool, dtype=np.float64)
    lab_emb = np.asarray(ctx.penultimate_labeled, dtype=np.float64)
    d = np.sqrt(
        ((pool_emb[:, None, :] - lab_emb[None, :, :]) ** 2).sum(axis=2)
    ).min(axis=1)
    initial = d.copy()
    chosen = []
    for _ in range(ctx.batch_size):
        order = np.lexsort((ctx.pool_idx, -d))
        pick = order[0]
        chosen.append(int(ctx.pool_idx[pick]))
        new_d = np.sqrt(((pool_emb - pool_emb[pick]) ** 2).sum(axis=1))
        d = np.minimum(d, new_d)
        d[pick] = -np.inf
    return SelectionResult(chosen=np.array(chosen, dtype=np.int64), scores=initial)


def select_margin_density(ctx: AcquisitionContext,
                          prefer_dense: bool = False,
                          assignment: cluster.ClusterAssignment | None = None
                          ) -> SelectionResult:
    """Smallest margin-times-density product over a k-means density estimate.

    With prefer_dense, high-mass clusters are favored instead (margin divided
    by density); the default follows the literal product reading.  A
    precomputed pool clustering can be injected through `assignment`.
    """
    if assignment is None:
        if ctx.penultimate_pool is None:
            raise ValueError("margin_density needs pool embeddings")
        k = min(20, ctx.pool_idx.size)
        seed = int(ctx.rng.integers(2**63))
        assignment = cluster.kmeans(ctx.penultimate_pool, k, seed)
    margins = score_margin(ctx.probs)
    density = assignment.sizes[assignment.labels] / ctx.pool_idx.size
    if prefer_dense:
        scores = margins / np.maximum(density, 1e-12)
    else:
        scores = margins * density
    return SelectionResult(
        chosen=_pick_smallest(scores, ctx.pool_idx, ctx.batch_size), scores=scores
    )


def select_cluster_margin(ctx: AcquisitionContext, m: float) -> SelectionResult:
    """Cycle size-sorted clusters of the ceil(m*B) lowest-margin candidates."""
    labels = ctx.cluster_margin_labels.get(m)
    if labels is None:
        raise ValueError(
            f"cluster_margin needs the cached one-time clustering for m={m}"
        )
    margins = score_margin(ctx.probs)
    n_retrieved = min(math.ceil(m * ctx.batch_size), ctx.pool_idx.size)
    retrieved = _pick_smallest(margins, ctx.pool_idx, n_retrieved)

    groups: dict[int, list[int]] = {}
    for idx in retrieved:
        groups.setdefault(int(labels[idx]), []).append(int(idx))
    order = sorted(groups, key=lambda cid: (len(groups[cid]), cid))

    chosen: list[int] = []
    while len(chosen) < ctx.batch_size:
        progressed = False
        for cid in order:
            members = groups[cid]
            if not members:
                continue
            pick = members.pop(int(ctx.rng.integers(len(members))))
            chosen.append(pick)
            progressed = True
            if len(chosen) >= ctx.batch_size:
                break
        if not progressed:
            break
    return SelectionResult(chosen=np.array(chosen, dtype=np.int64), scores=margins)


def score_qbc(ctx: AcquisitionContext,
              committee_size: int = COMMITTEE_SIZE) -> np.ndarray:
    """Variance ratio 1 - (modal votes)/K over a fresh-initialization committee."""
    if ctx.trainer is None:
        raise ValueError("qbc needs a trainer callback")
    n_classes = ctx.probs.shape[1]
    votes = np.zeros((ctx.pool_idx.size, n_classes), dtype=np.int64)
    for _ in range(committee_size):
        seed = int(ctx.rng.integers(2**63))
        # committee members are never pre-trained, even in pre-training runs
        member_probs = ctx.trainer(ctx.labeled_idx, seed, True)
        votes[np.arange(ctx.pool_idx.size), member_probs.argmax(axis=1)] += 1
    return 1.0 - votes.max(axis=1) / committee_size


def select_power(scores: np.ndarray, b: int, beta: float,
                 rng: np.random.Generator,
                 pool_idx: np.ndarray | None = None) -> SelectionResult:
    """Top-k of log-scores with Gumbel(0, 1/beta) noise.

    Equivalent to sampling k candidates without replacement from the softmax
    over beta * log(scores).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if (scores < 0).any():
        raise ValueError("power selection requires non-negative scores")
    if pool_idx is None:
        pool_idx = np.arange(scores.size, dtype=np.int64)
    noisy = np.log(np.maximum(scores, SCORE_FLOOR)) + rng.gumbel(
        0.0, 1.0 / beta, size=scores.size
    )
    return SelectionResult(chosen=_pick_largest(noisy, pool_idx, b), scores=noisy)


def select(strategy_id: str, ctx: AcquisitionContext) -> SelectionResult:
    """Dispatch to a strategy; saturating pools return everything."""
    if strategy_id not in STRATEGY_IDS:
        raise UnknownStrategyError(strategy_id)
    if ctx.pool_idx.size <= ctx.batch_size:
        return SelectionResult(chosen=np.sort(ctx.pool_idx))

    if strategy_id == "random":
        result = select_random(ctx)
    elif strategy_id == "margin":
        scores = score_margin(ctx.probs)
        result = SelectionResult(
            chosen=_pick_smallest(scores, ctx.pool_idx, ctx.batch_size), scores=scores
        )
    elif strategy_id == "entropy":
        scores = score_entropy(ctx.probs)
        result = SelectionResult(
            chosen=_pick_largest(scores, ctx.pool_idx, ctx.batch_size), scores=scores
        )
    elif strategy_id == "least_confident":
        scores = score_lc(ctx.probs)
        result = SelectionResult(
            chosen=_pick_largest(scores, ctx.pool_idx, ctx.batch_size), scores=scores
        )
    elif strategy_id == "random_margin":
        result = select_random_margin(ctx)
    elif strategy_id == "min_margin":
        result = select_min_margin(ctx)
    elif strategy_id == "typiclust":
        result = select_typiclust(ctx)
    elif strategy_id == "maxent":
        if ctx.mc_probs is None:
            raise ValueError("maxent needs MC-dropout probabilities")
        scores = score_maxent(ctx.mc_probs)
        result = SelectionResult(
            chosen=_pick_largest(scores, ctx.pool_idx, ctx.batch_size), scores=scores
        )
    elif strategy_id == "bald":
        if ctx.mc_probs is None:
            raise ValueError("bald needs MC-dropout probabilities")
        scores = score_bald(ctx.mc_probs)
        result = SelectionResult(
            chosen=_pick_largest(scores, ctx.pool_idx, ctx.batch_size), scores=scores
        )
    elif strategy_id == "coreset":
        result = select_coreset(ctx)
    elif strategy_id == "margin_density":
        result = select_margin_density(ctx)
    elif strategy_id in CLUSTER_MARGIN_M:
        result = select_cluster_margin(ctx, CLUSTER_MARGIN_M[strategy_id])
    elif strategy_id == "qbc":
        scores = score_qbc(ctx)
        result = SelectionResult(
            chosen=_pick_largest(scores, ctx.pool_idx, ctx.batch_size), scores=scores
        )
    elif strategy_id == "power_margin":
        result = select_power(
            1.0 - score_margin(ctx.probs), ctx.batch_size, POWER_BETA, ctx.rng,
            ctx.pool_idx,
        )
    elif strategy_id == "power_bald":
        # mutual information can dip below zero by floating-point noise
        scores = np.maximum(score_bald(ctx.mc_probs), 0.0)
        result = select_power(scores, ctx.batch_size, POWER_BETA, ctx.rng, ctx.pool_idx)
    else:  # pragma: no cover
        raise UnknownStrategyError(strategy_id)

    chosen = np.asarray(result.chosen, dtype=np.int64)
    if chosen.size != ctx.batch_size or np.unique(chosen).size != chosen.size:
        raise RuntimeError(f"{strategy_id} returned an invalid batch")
    if np.setdiff1d(chosen, ctx.pool_idx).size:
        raise RuntimeError(f"{strategy_id} selected non-pool indices")
    return result
