"""Pool-based active learning simulation: seed, train, select, relabel, repeat.

Randomness discipline: every cell of the benchmark grid owns RNG streams
derived by hashing (master seed, dataset, scenario, trial), so splits, seed
sets, and per-round model initializations are identical for every strategy
within a cell.  Strategy-internal randomness lives on a separate stream
keyed additionally by the strategy id.

All label reads go through a LabelStore that keeps an audit trail; pool
labels are only readable once acquired, test labels only for evaluation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import net, scarf, strategies
from .cluster import agglomerative_avg
from .data import Dataset, PreparedDataset, TrialSplit, make_split
from .records import TrialRecord, read_records

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed_size: int
    batch_size: int
    rounds: int = 20


SCENARIOS = {
    "small": ScenarioConfig("small", seed_size=30, batch_size=10),
    "medium": ScenarioConfig("medium", seed_size=100, batch_size=50),
    "large": ScenarioConfig("large", seed_size=300, batch_size=200),
}


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a sequence of key parts (order-sensitive)."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class ALState:
    labeled_idx: np.ndarray  # ordered acquisition history
    pool_idx: np.ndarray
    round: int


@dataclass
class AuditReport:
    violations: list[str] = field(default_factory=list)
    train_label_reads: int = 0
    test_label_reads: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


class LabelStore:
    """Guarded label access with an audit trail.

    Train-split labels become readable only once their index is acquired;
    test-split labels are only served for evaluation.
    """

    def __init__(self, y: np.ndarray, train_idx: np.ndarray, test_idx: np.ndarray):
        self._y = y
        self._train_idx = np.asarray(train_idx)
        self._test_idx = np.asarray(test_idx)
        self._acquired_round: dict[int, int] = {}
        self.report = AuditReport()

    def acquire(self, positions, round: int):
        """Mark train-split positions as labeled as of `round`."""
        for pos in np.asarray(positions).tolist():
            if pos in self._acquired_round:
                self.report.violations.append(
                    f"position {pos} acquired twice (round {round})"
                )
            else:
                self._acquired_round[pos] = round

    def train_labels(self, positions, round: int) -> np.ndarray:
        positions = np.asarray(positions)
        for pos in positions.tolist():
            acquired = self._acquired_round.get(pos)
            if acquired is None:
                self.report.violations.append(
                    f"pool label read for unacquired position {pos} at round {round}"
                )
            elif round < acquired:
                self.report.violations.append(
                    f"label of position {pos} read at round {round}, "
                    f"acquired only at round {acquired}"
                )
        self.report.train_label_reads += int(positions.size)
        return self._y[self._train_idx[positions]]

    def test_labels(self, purpose: str = "eval") -> np.ndarray:
        if purpose != "eval":
            self.report.violations.append(f"test labels read for {purpose!r}")
        self.report.test_label_reads += int(self._test_idx.size)
        return self._y[self._test_idx]


@dataclass
class TrialResult:
    records: list[TrialRecord]
    audit: AuditReport
    states: list[ALState] = field(default_factory=list)


def _resolve_scenario(scenario) -> ScenarioConfig:
    if isinstance(scenario, ScenarioConfig):
        return scenario
    if scenario not in SCENARIOS:
        raise ValueError(
            f"unknown scenario {scenario!r}; valid: {', '.join(SCENARIOS)}"
        )
    return SCENARIOS[scenario]


def _fallback_embeddings(X_train: np.ndarray) -> np.ndarray:
    """No-pretraining embedding space: encoded features, L2-normalized."""
    X = np.asarray(X_train, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    dead = norms == 0
    if dead.any():
        X = X.copy()
        X[dead, 0] = 1.0
        norms = np.where(dead, 1.0, norms)
    return X / norms[:, None]


def run_trial(prepared: PreparedDataset, split: TrialSplit, strategy_id: str,
              scenario, pretrain: bool, trial_seed: int, *,
              trial: int = 0,
              net_cfg: net.NetConfig | None = None,
              train_cfg: net.TrainConfig | None = None,
              pretrain_cfg: scarf.PretrainConfig | None = None,
              pretrained_backbone: list[net.LayerParams] | None = None,
              record_states: bool = False) -> TrialResult:
    """Simulate one active learning trial; one record per round.

    Round 0 evaluates the seed-set model; each later round evaluates the
    model retrained after the previous acquisition.  The loop stops after
    the scenario's round budget or once the pool is exhausted.
    """
    if strategy_id not in strategies.STRATEGY_IDS:
        raise strategies.UnknownStrategyError(strategy_id)
    scenario = _resolve_scenario(scenario)
    data = prepared.data
    net_cfg = replace(net_cfg or net.NetConfig(), n_classes=data.n_classes)
    train_cfg = train_cfg or net.TrainConfig()

    train_idx = split.train_idx
    n_train = train_idx.size
    if scenario.seed_size > n_train:
        raise ValueError(
            f"seed size {scenario.seed_size} exceeds train split of {n_train}"
        )

    X_train = data.X[train_idx]
    X_test = data.X[split.test_idx]
    store = LabelStore(data.y, train_idx, split.test_idx)

    seed_rng = np.random.default_rng(derive_seed(trial_seed, "seed-set"))
    labeled = np.sort(seed_rng.choice(n_train, size=scenario.seed_size, replace=False))
    pool = np.setdiff1d(np.arange(n_train), labeled)
    store.acquire(labeled, round=0)

    if pretrain and pretrained_backbone is None:
        pretrained_backbone = pretrain_on_split(
            prepared, split, trial_seed,
            net_cfg=net_cfg, train_cfg=train_cfg, pretrain_cfg=pretrain_cfg,
        )

    strategy_rng = np.random.default_rng(
        derive_seed(trial_seed, "strategy", strategy_id)
    )
    dropout_rate = (
        strategies.MC_DROPOUT_RATE
        if strategy_id in strategies.MC_DROPOUT_STRATEGIES
        else 0.0
    )

    ssl_embeddings = None
    if strategy_id == "typiclust":
        if pretrain:
            ssl_embeddings = scarf.embeddings(pretrained_backbone, X_train)
        else:
            ssl_embeddings = _fallback_embeddings(X_train)

    def fresh_model(seed: int, from_scratch: bool) -> net.ModelBundle:
        rng = np.random.default_rng(seed)
        bundle = net.init_model(X_train.shape[1], net_cfg, rng)
        if pretrain and not from_scratch:
            bundle.backbone = [layer.copy() for layer in pretrained_backbone]
        return bundle

    def train_on(positions: np.ndarray, round_: int, seed: int,
                 rate: float, from_scratch: bool) -> net.ModelBundle:
        y_view = store.train_labels(positions, round=round_)
        cfg = replace(train_cfg, rng_seed=seed)
        bundle = fresh_model(derive_seed(seed, "init"), from_scratch)
        return net.train_supervised(bundle, X_train[positions], y_view, cfg, rate)

    records: list[TrialRecord] = []
    states: list[ALState] = []
    cluster_cache: dict[float, np.ndarray] = {}
    round_ = 0
    while True:
        t0 = time.perf_counter()
        model = train_on(
            labeled, round_, derive_seed(trial_seed, "train", round_),
            dropout_rate, from_scratch=False,
        )
        acc = float(
            (net.predict_proba(model, X_test).argmax(axis=1)
             == store.test_labels(purpose="eval")).mean()
        )

        done = round_ >= scenario.rounds or pool.size == 0
        chosen = None
        if not done:
            res = net.forward(model, X_train[pool])
            probs = net.softmax(res.logits)

            mc_probs = None
            if strategy_id in strategies.MC_DROPOUT_STRATEGIES:
                masks = net.sample_mc_masks(model, strategies.MC_SAMPLES, strategy_rng)
                mc_probs = net.predict_proba(model, X_train[pool], masks)

            penult_pool = penult_labeled = None
            if strategy_id in strategies.EMBEDDING_STRATEGIES:
                penult_pool = res.penultimate
                penult_labeled = net.forward(model, X_train[labeled]).penultimate

            if strategy_id in strategies.CLUSTER_MARGIN_M:
                m = strategies.CLUSTER_MARGIN_M[strategy_id]
                if m not in cluster_cache:
                    # one-time clustering of all points, from the seed-set model
                    penult_all = net.forward(model, X_train).penultimate
                    n_clusters = max(1, math.floor(n_train / m))
                    cluster_cache[m] = agglomerative_avg(
                        penult_all, n_clusters
                    ).labels

            trainer = None
            if strategy_id in strategies.COMMITTEE_STRATEGIES:
                r_now = round_

                def trainer(indices, seed, from_scratch):
                    member = train_on(
                        np.asarray(indices), r_now, seed, 0.0, from_scratch
                    )
                    return net.predict_proba(member, X_train[pool])

            ctx = strategies.AcquisitionContext(
                labeled_idx=labeled,
                pool_idx=pool,
                batch_size=scenario.batch_size,
                rng=strategy_rng,
                round=round_,
                probs=probs,
                labeled_y=store.train_labels(labeled, round=round_),
                mc_probs=mc_probs,
                penultimate_pool=penult_pool,
                penultimate_labeled=penult_labeled,
                ssl_embeddings=ssl_embeddings,
                trainer=trainer,
                cluster_margin_labels=cluster_cache,
            )
            chosen = strategies.select(strategy_id, ctx).chosen

        records.append(TrialRecord(
            dataset_id=prepared.dataset_id,
            strategy_id=strategy_id,
            scenario=scenario.name,
            pretrain=pretrain,
            trial=trial,
            round=round_,
            labeled_count=int(labeled.size),
            test_accuracy=acc,
            wall_time=time.perf_counter() - t0,
        ))
        if record_states:
            states.append(ALState(labeled.copy(), pool.copy(), round_))
        if done:
            break

        store.acquire(chosen, round=round_ + 1)
        labeled = np.concatenate([labeled, np.sort(chosen)])
        pool = np.setdiff1d(pool, chosen)
        round_ += 1

    return TrialResult(records=records, audit=store.report, states=states)


def pretrain_on_split(prepared: PreparedDataset, split: TrialSplit,
                      seed: int, *,
                      net_cfg: net.NetConfig | None = None,
                      train_cfg: net.TrainConfig | None = None,
                      pretrain_cfg: scarf.PretrainConfig | None = None
                      ) -> list[net.LayerParams]:
    """Contrastive pre-training on the train split's features (labels unused)."""
    net_cfg = replace(
        net_cfg or net.NetConfig(), n_classes=prepared.data.n_classes
    )
    train_cfg = train_cfg or net.TrainConfig()
    pretrain_cfg = pretrain_cfg or scarf.PretrainConfig()
    init_rng = np.random.default_rng(derive_seed(seed, "pretrain-init"))
    model = net.init_model(
        prepared.data.X.shape[1], net_cfg, init_rng, with_pretrain_head=True,
    )
    result = scarf.pretrain(
        model,
        prepared.raw[split.train_idx],
        prepared.encoder,
        pretrain_cfg,
        replace(train_cfg, rng_seed=derive_seed(seed, "pretrain-train")),
        np.random.default_rng(derive_seed(seed, "pretrain")),
    )
    return result.backbone


@dataclass(frozen=True)
class BenchmarkConfig:
    strategies: tuple[str, ...]
    scenarios: tuple[str, ...]
    trials: int = 20
    pretrain_arms: tuple[bool, ...] = (False,)
    master_seed: int = 0
    workers: int = 1
    net_cfg: net.NetConfig = field(default_factory=net.NetConfig)
    train_cfg: net.TrainConfig = field(default_factory=net.TrainConfig)
    pretrain_cfg: scarf.PretrainConfig = field(default_factory=scarf.PretrainConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.strategies:
            raise ValueError("no strategies configured")
        for s in self.strategies:
            if s not in strategies.STRATEGY_IDS:
                raise strategies.UnknownStrategyError(s)
        for s in self.scenarios:
            _resolve_scenario(s)


@dataclass(frozen=True)
class Cell:
    dataset_id: str
    strategy_id: str
    scenario: str
    pretrain: bool
    trial: int

    @property
    def key(self) -> str:
        return (
            f"{self.dataset_id}|{self.strategy_id}|{self.scenario}"
            f"|{int(self.pretrain)}|{self.trial}"
        )


def enumerate_cells(datasets: list[str], cfg: BenchmarkConfig) -> list[Cell]:
    return [
        Cell(d, strat, scen, arm, trial)
        for d in datasets
        for arm in cfg.pretrain_arms
        for scen in cfg.scenarios
        for strat in cfg.strategies
        for trial in range(cfg.trials)
    ]


def cell_seed(master_seed: int, cell: Cell) -> int:
    # strategy and pretrain arm deliberately excluded: strategies within a
    # (dataset, scenario, trial) cell must share seed sets and model seeds
    return derive_seed(master_seed, cell.dataset_id, cell.scenario, cell.trial)


def split_seed(master_seed: int, dataset_id: str, trial: int) -> int:
    return derive_seed(master_seed, dataset_id, "split", trial)


def _limit_worker_threads():
    """Keep BLAS single-threaded inside pool workers (avoids oversubscription)."""
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1)
    except ImportError:  # pragma: no cover
        pass


def _run_cell(prepared: PreparedDataset, cell: Cell, cfg: BenchmarkConfig,
              backbone_path: str | None):
    backbone = net.load_backbone(backbone_path) if backbone_path else None
    split = make_split(prepared.data, split_seed(cfg.master_seed, cell.dataset_id,
                                                 cell.trial))
    result = run_trial(
        prepared, split, cell.strategy_id, cell.scenario, cell.pretrain,
        cell_seed(cfg.master_seed, cell), trial=cell.trial,
        net_cfg=cfg.net_cfg, train_cfg=cfg.train_cfg, pretrain_cfg=cfg.pretrain_cfg,
        pretrained_backbone=backbone,
    )
    audit = {
        "cell": cell.key,
        "violations": result.audit.violations,
        "train_label_reads": result.audit.train_label_reads,
        "test_label_reads": result.audit.test_label_reads,
    }
    return cell.key, result.records, audit


def _ensure_pretrained(datasets: dict[str, PreparedDataset], cells: list[Cell],
                       cfg: BenchmarkConfig, out_dir: Path) -> dict[tuple, str]:
    """Pre-train once per (dataset, trial); cache checkpoints on disk."""
    needed = sorted({(c.dataset_id, c.trial) for c in cells if c.pretrain})
    if not needed:
        return {}
    ckpt_dir = out_dir / "pretrain"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for dataset_id, trial in needed:
        path = ckpt_dir / f"{dataset_id}_{trial}.ckpt"
        if not path.exists():
            prepared = datasets[dataset_id]
            split = make_split(prepared.data, split_seed(cfg.master_seed,
                                                         dataset_id, trial))
            backbone = pretrain_on_split(
                prepared, split, derive_seed(cfg.master_seed, dataset_id,
                                             "pretrain", trial),
                net_cfg=cfg.net_cfg, train_cfg=cfg.train_cfg,
                pretrain_cfg=cfg.pretrain_cfg,
            )
            tmp = path.with_suffix(".tmp")
            net.save_backbone(tmp, backbone,
                              meta={"dataset": dataset_id, "trial": trial})
            tmp.replace(path)
        paths[(dataset_id, trial)] = str(path)
    return paths


def run_benchmark(datasets: list[PreparedDataset], cfg: BenchmarkConfig,
                  out_dir) -> list[TrialRecord]:
    """Run the full grid, streaming records to `out_dir/records.jsonl`.

    A completed-cell ledger makes the run resumable: finished cells are
    never recomputed, partially written ones are re-run.  The final records
    file is rewritten in canonical cell order so that identically configured
    runs produce identical files (wall times aside).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    ledger_path = out_dir / "ledger.jsonl"
    audit_path = out_dir / "audit.jsonl"

    by_id = {p.dataset_id: p for p in datasets}
    if len(by_id) != len(datasets):
        raise ValueError("duplicate dataset ids")
    cells = enumerate_cells(list(by_id), cfg)

    completed: set[str] = set()
    if ledger_path.exists():
        for line in ledger_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                completed.add(json.loads(line)["cell"])

    kept_records: dict[str, list[TrialRecord]] = {key: [] for key in completed}
    if records_path.exists():
        for rec in read_records(records_path):
            key = Cell(rec.dataset_id, rec.strategy_id, rec.scenario,
                       rec.pretrain, rec.trial).key
            if key in kept_records:
                kept_records[key].append(rec)
    kept_audits: dict[str, dict] = {}
    if audit_path.exists():
        for line in audit_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                entry = json.loads(line)
                if entry["cell"] in completed:
                    kept_audits[entry["cell"]] = entry

    todo = [c for c in cells if c.key not in completed]
    log.info("benchmark grid: %d cells (%d already complete)",
             len(cells), len(cells) - len(todo))
    backbones = _ensure_pretrained(by_id, todo, cfg, out_dir)

    # run the missing cells, appending results as each finishes so a killed
    # run can resume from the ledger; the canonical rewrite happens below
    results: dict[str, tuple[list[TrialRecord], dict]] = {}

    def _persist(key: str, recs: list[TrialRecord], audit: dict):
        results[key] = (recs, audit)
        with open(records_path, "a", encoding="utf-8") as rf:
            for rec in recs:
                rf.write(rec.to_line() + "\n")
        with open(audit_path, "a", encoding="utf-8") as af:
            af.write(json.dumps(audit) + "\n")
        with open(ledger_path, "a", encoding="utf-8") as lf:
            lf.write(json.dumps({"cell": key}) + "\n")

    if cfg.workers > 1 and todo:
        with ProcessPoolExecutor(
            max_workers=cfg.workers, initializer=_limit_worker_threads
        ) as pool:
            futures = {
                c.key: pool.submit(
                    _run_cell, by_id[c.dataset_id], c, cfg,
                    backbones.get((c.dataset_id, c.trial)) if c.pretrain else None,
                )
                for c in todo
            }
            for c in todo:
                _persist(*futures[c.key].result())
    else:
        for c in todo:
            _persist(*_run_cell(
                by_id[c.dataset_id], c, cfg,
                backbones.get((c.dataset_id, c.trial)) if c.pretrain else None,
            ))

    # rewrite everything in canonical cell order (atomic replace)
    all_records: list[TrialRecord] = []
    audits: list[dict] = []
    with open(records_path.with_suffix(".tmp"), "w", encoding="utf-8") as rf, \
            open(ledger_path.with_suffix(".tmp"), "w", encoding="utf-8") as lf, \
            open(audit_path.with_suffix(".tmp"), "w", encoding="utf-8") as af:
        for c in cells:
            if c.key in results:
                recs, audit = results[c.key]
            else:
                recs = kept_records[c.key]
                audit = kept_audits.get(
                    c.key, {"cell": c.key, "violations": [],
                            "train_label_reads": 0, "test_label_reads": 0}
                )
            for rec in recs:
                rf.write(rec.to_line() + "\n")
            lf.write(json.dumps({"cell": c.key}) + "\n")
            af.write(json.dumps(audit) + "\n")
            all_records.extend(recs)
            audits.append(audit)
    records_path.with_suffix(".tmp").replace(records_path)
    ledger_path.with_suffix(".tmp").replace(ledger_path)
    audit_path.with_suffix(".tmp").replace(audit_path)

    bad = [a for a in audits if a["violations"]]
    if bad:
        log.error("label-access violations in %d cells", len(bad))
    return all_records
