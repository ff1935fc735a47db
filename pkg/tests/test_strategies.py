import math

import numpy as np
import pytest

from albench.cluster import ClusterAssignment
from albench.strategies import (
    STRATEGY_IDS,
    AcquisitionContext,
    UnknownStrategyError,
    score_bald,
    score_entropy,
    score_lc,
    score_margin,
    score_maxent,
    score_qbc,
    select,
    select_cluster_margin,
    select_coreset,
    select_margin_density,
    select_min_margin,
    select_power,
    select_random,
    select_random_margin,
    select_typiclust,
)


def normalize_rows(a):
    a = np.asarray(a, dtype=np.float64)
    return a / a.sum(axis=1, keepdims=True)


def random_probs(rng, n, c):
    return normalize_rows(rng.uniform(0.01, 1.0, size=(n, c)))


def make_ctx(probs=None, n_pool=None, batch=2, n_labeled=3, seed=0, **kw):
    if probs is not None:
        probs = np.asarray(probs, dtype=np.float64)
        n_pool = probs.shape[0]
    pool = np.arange(n_pool)
    labeled = n_pool + np.arange(n_labeled)
    return AcquisitionContext(
        labeled_idx=labeled,
        pool_idx=pool,
        batch_size=batch,
        rng=np.random.default_rng(seed),
        probs=probs,
        **kw,
    )


class StubRng:
    """rng double: zero Gumbel noise, first-element integer draws."""

    def gumbel(self, loc, scale, size):
        return np.zeros(size)

    def integers(self, *args, **kwargs):
        return 0


# --- plain uncertainty scores -------------------------------------------------

def test_margin_examples():
    assert score_margin(np.array([[0.7, 0.2, 0.1]]))[0] == pytest.approx(0.5)
    assert score_margin(np.array([[0.25, 0.25, 0.25, 0.25]]))[0] == 0.0
    assert score_margin(np.array([[0.0, 1.0, 0.0]]))[0] == 1.0


def test_margin_needs_two_classes():
    with pytest.raises(ValueError):
        score_margin(np.ones((3, 1)))


def test_entropy_examples():
    assert score_entropy(np.full((1, 4), 0.25))[0] == pytest.approx(math.log(4))
    assert score_entropy(np.array([[1.0, 0.0, 0.0]]))[0] == 0.0
    assert score_entropy(np.array([[0.5, 0.5]]))[0] == pytest.approx(math.log(2))


def test_lc_examples():
    assert score_lc(np.array([[0.7, 0.2, 0.1]]))[0] == pytest.approx(0.3)
    assert score_lc(np.array([[0.0, 1.0]]))[0] == 0.0
    assert score_lc(np.full((1, 5), 0.2))[0] == pytest.approx(1 - 1 / 5)


# --- random and random-margin ---------------------------------------------------

def test_random_whole_pool_when_saturated():
    ctx = make_ctx(n_pool=4, batch=9)
    assert select("random", ctx).chosen.tolist() == [0, 1, 2, 3]


def test_random_reproducible():
    a = select_random(make_ctx(n_pool=20, batch=5, seed=42)).chosen
    b = select_random(make_ctx(n_pool=20, batch=5, seed=42)).chosen
    assert np.array_equal(a, b)


def test_random_uniform_frequencies():
    n_pool, batch, draws = 5, 2, 100_000
    rng = np.random.default_rng(0)
    pool = np.arange(n_pool)
    counts = np.zeros(n_pool)
    for _ in range(draws):
        counts[rng.choice(pool, size=batch, replace=False)] += 1
    # each index has marginal batch/n_pool; check within 3 sigma
    p = batch / n_pool
    sigma = math.sqrt(p * (1 - p) * draws)
    assert np.all(np.abs(counts - p * draws) < 3 * sigma)


def test_random_margin_split_counts():
    rng = np.random.default_rng(1)
    probs = random_probs(rng, 30, 3)
    ctx = make_ctx(probs=probs, batch=10)
    result = select_random_margin(ctx)
    margins = score_margin(probs)
    lowest5 = set(np.argsort(margins, kind="stable")[:5].tolist())
    chosen = result.chosen.tolist()
    assert len(chosen) == 10
    assert set(chosen[:5]) == lowest5
    assert not (set(chosen[5:]) & lowest5)


def test_random_margin_batch_one_is_margin():
    rng = np.random.default_rng(2)
    probs = random_probs(rng, 10, 3)
    ctx = make_ctx(probs=probs, batch=1)
    result = select_random_margin(ctx)
    assert result.chosen.tolist() == [int(np.argmin(score_margin(probs)))]


def test_random_margin_deterministic():
    rng = np.random.default_rng(3)
    probs = random_probs(rng, 12, 2)
    a = select_random_margin(make_ctx(probs=probs, batch=4, seed=5)).chosen
    b = select_random_margin(make_ctx(probs=probs, batch=4, seed=5)).chosen
    assert np.array_equal(a, b)


# --- min-margin ----------------------------------------------------------------

def min_margin_ctx(probs, member_probs, batch=2):
    queue = list(member_probs)

    def trainer(indices, seed, from_scratch):
        return queue.pop(0)

    ctx = make_ctx(probs=probs, batch=batch, trainer=trainer)
    ctx.labeled_y = np.array([0, 1, 0])
    return ctx


def test_min_margin_single_member_is_margin():
    rng = np.random.default_rng(4)
    probs = random_probs(rng, 8, 3)
    ctx = min_margin_ctx(probs, [probs], batch=3)
    result = select_min_margin(ctx, committee_size=1)
    expected = select("margin", make_ctx(probs=probs, batch=3)).chosen
    assert np.array_equal(result.chosen, expected)


def test_min_margin_identical_committee_is_margin():
    rng = np.random.default_rng(5)
    probs = random_probs(rng, 8, 3)
    ctx = min_margin_ctx(probs, [probs] * 5, batch=3)
    result = select_min_margin(ctx, committee_size=5)
    expected = select("margin", make_ctx(probs=probs, batch=3)).chosen
    assert np.array_equal(result.chosen, expected)


def test_min_margin_elementwise_minimum():
    rng = np.random.default_rng(6)
    members = [random_probs(rng, 4, 3) for _ in range(3)]
    ctx = min_margin_ctx(members[0], members, batch=2)
    result = select_min_margin(ctx, committee_size=3)
    expected_scores = np.min([score_margin(m) for m in members], axis=0)
    assert np.allclose(result.scores, expected_scores)
    order = np.lexsort((np.arange(4), expected_scores))
    assert np.array_equal(result.chosen, order[:2])


def test_min_margin_bootstrap_skips_absent_class(caplog):
    rng = np.random.default_rng(7)
    probs = random_probs(rng, 6, 3)
    seen = []

    def trainer(indices, seed, from_scratch):
        seen.append(np.asarray(indices))
        return probs

    ctx = make_ctx(probs=probs, batch=2, trainer=trainer)
    ctx.labeled_y = np.array([0, 0, 2])  # class 1 unrepresented
    select_min_margin(ctx, committee_size=2)
    for multiset in seen:
        assert multiset.size == 3  # bootstraps of sizes 2 + 0 + 1


# --- typiclust -------------------------------------------------------------------

def test_typiclust_picks_one_per_blob():
    rng = np.random.default_rng(8)
    blob_dirs = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    pool_emb = np.vstack([
        d + rng.normal(scale=0.01, size=(4, 3)) for d in blob_dirs
    ])
    labeled_emb = np.array([[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0]]) * 5
    ssl = np.vstack([pool_emb, labeled_emb])
    ctx = AcquisitionContext(
        labeled_idx=np.array([12, 13]),
        pool_idx=np.arange(12),
        batch_size=3,
        rng=np.random.default_rng(0),
        ssl_embeddings=ssl,
    )
    chosen = select_typiclust(ctx).chosen
    blobs = {tuple(sorted(range(4 * k, 4 * k + 4))) for k in range(3)}
    hit = {tuple(sorted(b for b in blob if b in chosen)) for blob in
           [range(0, 4), range(4, 8), range(8, 12)]}
    assert len(chosen) == 3
    assert all(len(h) == 1 for h in hit), (chosen, blobs)


def test_typiclust_duplicate_candidate_most_typical():
    # cluster of three identical directions plus one outlier: a duplicate has
    # zero mean neighbor distance, so the epsilon guard ranks it first
    pool_emb = np.array([
        [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.8, 0.6],
    ])
    labeled_emb = np.array([[-1.0, 0.0]])
    ssl = np.vstack([pool_emb, labeled_emb])
    ctx = AcquisitionContext(
        labeled_idx=np.array([4]),
        pool_idx=np.arange(4),
        batch_size=1,
        rng=np.random.default_rng(1),
        ssl_embeddings=ssl,
    )
    chosen = select_typiclust(ctx).chosen
    assert chosen.tolist() == [0]


def test_typiclust_matches_brute_force():
    rng = np.random.default_rng(9)
    centers = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    pool_emb = np.vstack([
        c + rng.normal(scale=0.08, size=(4, 3)) for c in centers
    ])
    labeled_emb = np.array([[-1.0, -1.0, -1.0]])
    ssl = np.vstack([pool_emb, labeled_emb])
    ssl /= np.linalg.norm(ssl, axis=1, keepdims=True)
    ctx = AcquisitionContext(
        labeled_idx=np.array([12]),
        pool_idx=np.arange(12),
        batch_size=3,
        rng=np.random.default_rng(2),
        ssl_embeddings=ssl,
    )
    chosen = select_typiclust(ctx).chosen

    # oracle: direct evaluation of the typicality formula inside each blob
    expected = []
    for blob in [range(0, 4), range(4, 8), range(8, 12)]:
        members = list(blob)
        best = None
        for i in members:
            dists = []
            for j in members:
                if j == i:
                    continue
                cos = float(ssl[i] @ ssl[j])
                dists.append((1 - cos) / 2)
            dists.sort()
            k = min(13, max(20, 4))
            k = min(k, len(members) - 1)
            typ = 1.0 / (float(np.mean(dists[:k])) + 1e-12)
            if best is None or typ > best[0]:
                best = (typ, i)
        expected.append(best[1])
    assert sorted(chosen.tolist()) == sorted(expected)


# --- MC-dropout scores ------------------------------------------------------------

def test_maxent_identical_onehot_members():
    member = np.array([[1.0, 0.0], [0.0, 1.0]])
    mc = np.stack([member] * 5)
    assert np.allclose(score_maxent(mc), 0.0)


def test_maxent_two_disagreeing_members():
    mc = np.stack([
        np.array([[1.0, 0.0]]),
        np.array([[0.0, 1.0]]),
    ])
    assert score_maxent(mc)[0] == pytest.approx(math.log(2))


def test_maxent_matches_direct_formula():
    rng = np.random.default_rng(10)
    mc = np.stack([random_probs(rng, 6, 4) for _ in range(5)])
    mean = mc.mean(axis=0)
    direct = -np.sum(mean * np.log(mean), axis=1)
    assert np.allclose(score_maxent(mc), direct, atol=1e-12)


def test_bald_identical_members_zero():
    rng = np.random.default_rng(11)
    member = random_probs(rng, 5, 3)
    mc = np.stack([member] * 7)
    assert np.allclose(score_bald(mc), 0.0, atol=1e-12)


def test_bald_two_deterministic_members():
    mc = np.stack([
        np.array([[1.0, 0.0]]),
        np.array([[0.0, 1.0]]),
    ])
    assert score_bald(mc)[0] == pytest.approx(math.log(2))


def test_bald_bounds_and_direct_formula():
    rng = np.random.default_rng(12)
    for _ in range(20):
        mc = np.stack([random_probs(rng, 8, 3) for _ in range(6)])
        info = score_bald(mc)
        h = score_maxent(mc)
        assert np.all(info >= -1e-12)
        assert np.all(info <= h + 1e-12)
        member_entropy = np.mean(
            [-np.sum(p * np.log(p), axis=1) for p in mc], axis=0
        )
        assert np.allclose(info, h - member_entropy, atol=1e-12)


# --- coreset ---------------------------------------------------------------------

def coreset_ctx(pool_emb, labeled_emb, batch):
    return AcquisitionContext(
        labeled_idx=len(pool_emb) + np.arange(len(labeled_emb)),
        pool_idx=np.arange(len(pool_emb)),
        batch_size=batch,
        rng=np.random.default_rng(0),
        penultimate_pool=np.asarray(pool_emb, dtype=np.float64),
        penultimate_labeled=np.asarray(labeled_emb, dtype=np.float64),
    )


def test_coreset_farthest_point():
    ctx = coreset_ctx([[3.0], [10.0]], [[0.0]], batch=1)
    assert select_coreset(ctx).chosen.tolist() == [1]


def test_coreset_forced_order():
    ctx = coreset_ctx([[3.0], [10.0]], [[0.0]], batch=2)
    assert select_coreset(ctx).chosen.tolist() == [1, 0]


def test_coreset_matches_greedy_oracle():
    rng = np.random.default_rng(13)
    pool_emb = rng.normal(size=(30, 4))
    labeled_emb = rng.normal(size=(5, 4))
    ctx = coreset_ctx(pool_emb, labeled_emb, batch=5)
    chosen = select_coreset(ctx).chosen.tolist()

    covered = list(labeled_emb)
    remaining = dict(enumerate(pool_emb))
    expected = []
    for _ in range(5):
        best = None
        for i, x in sorted(remaining.items()):
            d = min(float(np.linalg.norm(x - c)) for c in covered)
            if best is None or d > best[0]:
                best = (d, i)
        expected.append(best[1])
        covered.append(remaining.pop(best[1]))
    assert chosen == expected


# --- margin-density ---------------------------------------------------------------

def singleton_assignment(n):
    return ClusterAssignment(labels=np.arange(n), sizes=np.ones(n, dtype=int),
                             n_clusters=n)


def test_margin_density_equal_densities_is_margin():
    rng = np.random.default_rng(14)
    probs = random_probs(rng, 12, 3)
    ctx = make_ctx(probs=probs, batch=4)
    result = select_margin_density(ctx, assignment=singleton_assignment(12))
    expected = select("margin", make_ctx(probs=probs, batch=4)).chosen
    assert np.array_equal(result.chosen, expected)


def test_margin_density_equal_margins_rank_by_density():
    probs = np.tile([0.6, 0.4], (10, 1))  # constant margin 0.2
    labels = np.array([0] * 7 + [1] * 3)
    assignment = ClusterAssignment(labels=labels, sizes=np.array([7, 3]),
                                   n_clusters=2)
    ctx = make_ctx(probs=probs, batch=3)
    result = select_margin_density(ctx, assignment=assignment)
    assert result.chosen.tolist() == [7, 8, 9]  # the sparse cluster first


def test_margin_density_hand_products():
    rng = np.random.default_rng(15)
    probs = random_probs(rng, 10, 3)
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2, 2])
    assignment = ClusterAssignment(labels=labels, sizes=np.array([4, 3, 3]),
                                   n_clusters=3)
    ctx = make_ctx(probs=probs, batch=3)
    result = select_margin_density(ctx, assignment=assignment)
    margins = score_margin(probs)
    density = np.array([4, 4, 4, 4, 3, 3, 3, 3, 3, 3]) / 10
    expected_scores = margins * density
    assert np.allclose(result.scores, expected_scores)
    order = np.lexsort((np.arange(10), expected_scores))
    assert np.array_equal(result.chosen, order[:3])


def test_margin_density_prefer_dense_flag():
    probs = np.tile([0.6, 0.4], (10, 1))
    labels = np.array([0] * 7 + [1] * 3)
    assignment = ClusterAssignment(labels=labels, sizes=np.array([7, 3]),
                                   n_clusters=2)
    ctx = make_ctx(probs=probs, batch=3)
    result = select_margin_density(ctx, prefer_dense=True, assignment=assignment)
    assert result.chosen.tolist() == [0, 1, 2]  # the dense cluster first


def test_margin_density_kmeans_path_runs():
    rng = np.random.default_rng(16)
    probs = random_probs(rng, 25, 3)
    ctx = make_ctx(probs=probs, batch=5,
                   penultimate_pool=rng.normal(size=(25, 4)))
    result = select("margin_density", ctx)
    assert len(result.chosen) == 5


# --- cluster-margin ------------------------------------------------------------------

def cm_ctx(margin_probs, labels, batch, rng=None, n_labeled=2):
    n = margin_probs.shape[0]
    ctx = make_ctx(probs=margin_probs, batch=batch, n_labeled=n_labeled)
    if rng is not None:
        ctx.rng = rng
    ctx.cluster_margin_labels = {1.25: np.asarray(labels), 10.0: np.asarray(labels)}
    return ctx


def margin_probs_from(margins):
    """Binary rows with the requested margin values."""
    margins = np.asarray(margins, dtype=np.float64)
    top = (1 + margins) / 2
    return np.stack([top, 1 - top], axis=1)


def test_cluster_margin_singletons_contained_in_retrieved():
    rng = np.random.default_rng(17)
    margins = rng.uniform(size=20)
    probs = margin_probs_from(margins)
    labels = np.arange(22)  # every point its own cluster
    ctx = cm_ctx(probs, labels, batch=4)
    chosen = select_cluster_margin(ctx, m=1.25).chosen
    retrieved = np.lexsort((np.arange(20), margins))[:5]  # ceil(1.25 * 4)
    assert set(chosen.tolist()) <= set(retrieved.tolist())


def test_cluster_margin_single_giant_cluster():
    rng = np.random.default_rng(18)
    margins = rng.uniform(size=20)
    probs = margin_probs_from(margins)
    labels = np.zeros(22, dtype=int)
    ctx = cm_ctx(probs, labels, batch=4)
    chosen = select_cluster_margin(ctx, m=1.25).chosen
    retrieved = np.lexsort((np.arange(20), margins))[:5]
    assert len(chosen) == 4
    assert set(chosen.tolist()) <= set(retrieved.tolist())


def test_cluster_margin_cycling_step_through():
    # margins pick candidates 0..4; clusters: {0} {1} {2,3,4}
    margins = np.array([0.01, 0.02, 0.03, 0.04, 0.05, 0.9, 0.9, 0.9])
    probs = margin_probs_from(margins)
    labels = np.array([0, 1, 2, 2, 2, 3, 3, 3, 4, 4])
    ctx = cm_ctx(probs, labels, batch=3, rng=StubRng())
    chosen = select_cluster_margin(ctx, m=1.25).chosen  # retrieves ceil(3.75)=4
    # retrieved = {0,1,2,3}; sizes: {0}:1, {1}:1, {2,3}:2
    # ascending size cycle with first-element draws -> 0, 1, then 2
    assert chosen.tolist() == [0, 1, 2]


def test_cluster_margin_requires_cache():
    rng = np.random.default_rng(19)
    probs = random_probs(rng, 8, 2)
    ctx = make_ctx(probs=probs, batch=2)
    with pytest.raises(ValueError, match="one-time clustering"):
        select_cluster_margin(ctx, m=1.25)


# --- qbc ---------------------------------------------------------------------------

def qbc_ctx(member_probs, batch=2):
    queue = list(member_probs)

    def trainer(indices, seed, from_scratch):
        assert from_scratch  # committee members are never pre-trained
        return queue.pop(0)

    return make_ctx(probs=member_probs[0], batch=batch, trainer=trainer)


def test_qbc_unanimous_zero():
    member = np.array([[0.9, 0.1], [0.2, 0.8]])
    ctx = qbc_ctx([member] * 25)
    assert np.allclose(score_qbc(ctx), 0.0)


def test_qbc_variance_ratio_arithmetic():
    votes_a = np.array([[1.0, 0.0]])
    votes_b = np.array([[0.0, 1.0]])
    members = [votes_a] * 13 + [votes_b] * 12
    ctx = qbc_ctx(members, batch=1)
    assert score_qbc(ctx, committee_size=25)[0] == pytest.approx(0.48)


def test_qbc_three_member_hand_count():
    m1 = np.array([[0.9, 0.1], [0.9, 0.1], [0.2, 0.8]])
    m2 = np.array([[0.8, 0.2], [0.3, 0.7], [0.3, 0.7]])
    m3 = np.array([[0.6, 0.4], [0.4, 0.6], [0.1, 0.9]])
    ctx = qbc_ctx([m1, m2, m3], batch=1)
    v = score_qbc(ctx, committee_size=3)
    # votes per candidate: [3,0], [1,2], [0,3] -> 1 - f/3
    assert np.allclose(v, [0.0, 1 / 3, 0.0])


# --- power selection -----------------------------------------------------------------

def test_power_zero_noise_is_topk():
    scores = np.array([0.3, 0.9, 0.1, 0.7])
    result = select_power(scores, b=2, beta=1.0, rng=StubRng())
    assert result.chosen.tolist() == [1, 3]


def test_power_negative_scores_rejected():
    with pytest.raises(ValueError, match="non-negative"):
        select_power(np.array([0.5, -0.1]), 1, 1.0, np.random.default_rng(0))


def test_power_matches_softmax_sampling():
    scores = np.array([1.0, math.e])
    rng = np.random.default_rng(20)
    draws = 100_000
    noise = rng.gumbel(0.0, 1.0, size=(draws, 2))
    picks = (np.log(scores) + noise).argmax(axis=1)
    freq = np.bincount(picks, minlength=2) / draws
    p_second = math.e / (1 + math.e)
    sigma = math.sqrt(p_second * (1 - p_second) / draws)
    assert abs(freq[1] - p_second) < 3 * sigma
    # spot-check the implementation draws from the same law
    chosen = [
        select_power(scores, 1, 1.0, np.random.default_rng(s)).chosen[0]
        for s in range(2000)
    ]
    ratio = np.mean(np.asarray(chosen) == 1)
    assert abs(ratio - p_second) < 4 * math.sqrt(p_second * (1 - p_second) / 2000)


def test_power_equal_scores_uniform():
    scores = np.ones(3)
    rng = np.random.default_rng(21)
    counts = np.zeros(3)
    for _ in range(3000):
        counts[select_power(scores, 1, 1.0, rng).chosen[0]] += 1
    assert np.all(np.abs(counts / 3000 - 1 / 3) < 4 * math.sqrt(2 / 9 / 3000))


def test_power_large_beta_deterministic_limit():
    rng = np.random.default_rng(22)
    scores = np.array([0.2, 0.5, 0.9, 0.4])
    expected = [2]
    hits = sum(
        select_power(scores, 1, 1e6, rng).chosen.tolist() == expected
        for _ in range(1000)
    )
    assert hits >= 999


# --- dispatch -------------------------------------------------------------------------

def test_select_saturation_any_strategy():
    for strategy in STRATEGY_IDS:
        ctx = make_ctx(n_pool=3, batch=7)
        assert select(strategy, ctx).chosen.tolist() == [0, 1, 2]


def test_select_unknown_strategy():
    ctx = make_ctx(n_pool=3, batch=1)
    with pytest.raises(UnknownStrategyError, match="margin"):
        select("beam_search", ctx)


def test_margin_entropy_lc_agree_on_binary():
    rng = np.random.default_rng(23)
    for _ in range(20):
        probs = random_probs(rng, 15, 2)
        sets = {
            s: frozenset(select(s, make_ctx(probs=probs, batch=4)).chosen.tolist())
            for s in ["margin", "entropy", "least_confident"]
        }
        assert sets["margin"] == sets["entropy"] == sets["least_confident"]


def full_ctx(seed, n_pool=14, n_labeled=6, batch=4, n_classes=3):
    rng = np.random.default_rng(seed)
    probs = random_probs(rng, n_pool, n_classes)
    n_total = n_pool + n_labeled
    member_probs = random_probs(rng, n_pool, n_classes)

    def trainer(indices, seed_, from_scratch):
        return normalize_rows(
            np.random.default_rng(seed_).uniform(0.01, 1, size=(n_pool, n_classes))
        )

    ctx = make_ctx(
        probs=probs,
        batch=batch,
        n_labeled=n_labeled,
        seed=seed,
        mc_probs=np.stack([random_probs(rng, n_pool, n_classes) for _ in range(5)]),
        penultimate_pool=rng.normal(size=(n_pool, 6)),
        penultimate_labeled=rng.normal(size=(n_labeled, 6)),
        ssl_embeddings=rng.normal(size=(n_total, 6)),
        trainer=trainer,
    )
    ctx.labeled_y = rng.integers(0, n_classes, size=n_labeled)
    ctx.labeled_y[:n_classes] = np.arange(n_classes)
    ctx.cluster_margin_labels = {
        1.25: rng.integers(0, 5, size=n_total),
        10.0: rng.integers(0, 3, size=n_total),
    }
    return ctx


@pytest.mark.parametrize("strategy", STRATEGY_IDS)
def test_every_strategy_returns_valid_batch(strategy):
    for seed in range(3):
        ctx = full_ctx(seed)
        result = select(strategy, ctx)
        chosen = result.chosen
        assert chosen.size == ctx.batch_size
        assert np.unique(chosen).size == chosen.size
        assert np.setdiff1d(chosen, ctx.pool_idx).size == 0
        assert np.intersect1d(chosen, ctx.labeled_idx).size == 0


@pytest.mark.parametrize("strategy", STRATEGY_IDS)
def test_every_strategy_deterministic(strategy):
    a = select(strategy, full_ctx(7)).chosen
    b = select(strategy, full_ctx(7)).chosen
    assert np.array_equal(a, b)
