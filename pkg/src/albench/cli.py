"""Command line entry points: benchmark runs, report emission, dataset fetch.

A JSON config file is the canonical run interface; every flag overrides the
corresponding config field.  Exit codes: 0 success, 1 configuration error,
2 run finished but some dataset cells failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import data, loop, stats, strategies
from .net import NetConfig, TrainConfig
from .records import read_records
from .scarf import PretrainConfig

# rounds displayed in the reference figures (large is not pinned; it follows
# the medium convention)
DEFAULT_REPORT_ROUND = {"small": 7, "medium": 3, "large": 3}

CACHE_ENV = "ALBENCH_CACHE_DIR"
BASE_URL_ENV = "ALBENCH_BASE_URL"


class ConfigError(Exception):
    pass


def _load_run_config(args) -> dict:
    cfg = {
        "datasets": [],
        "strategies": [],
        "scenarios": ["medium"],
        "trials": 20,
        "pretrain": "off",
        "seed": 0,
        "workers": 1,
        "out": "albench-out",
    }
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg.update(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if args.datasets:
        cfg["datasets"] = args.datasets.split(",")
    if args.strategies:
        cfg["strategies"] = args.strategies.split(",")
    if args.scenario:
        cfg["scenarios"] = [args.scenario]
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.pretrain:
        cfg["pretrain"] = args.pretrain
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.out:
        cfg["out"] = args.out
    return cfg


def _validate_run_config(cfg: dict) -> loop.BenchmarkConfig:
    if not cfg["datasets"]:
        raise ConfigError("no datasets configured")
    for s in cfg["strategies"]:
        if s not in strategies.STRATEGY_IDS:
            raise ConfigError(
                f"unknown strategy {s!r}; valid ids: "
                + ", ".join(strategies.STRATEGY_IDS)
            )
    for s in cfg["scenarios"]:
        if s not in loop.SCENARIOS:
            raise ConfigError(
                f"unknown scenario {s!r}; valid: " + ", ".join(loop.SCENARIOS)
            )
    arms = {"off": (False,), "on": (True,), "both": (False, True)}.get(cfg["pretrain"])
    if arms is None:
        raise ConfigError("pretrain must be one of: on, off, both")
    try:
        # optional config-only sections, mostly for scaled-down studies
        net_cfg = NetConfig(**cfg.get("net", {}))
        train_cfg = TrainConfig(**cfg.get("train", {}))
        pretrain_cfg = PretrainConfig(**cfg.get("pretrain_cfg", {}))
        return loop.BenchmarkConfig(
            strategies=tuple(cfg["strategies"]),
            scenarios=tuple(cfg["scenarios"]),
            trials=int(cfg["trials"]),
            pretrain_arms=arms,
            master_seed=int(cfg["seed"]),
            workers=int(cfg["workers"]),
            net_cfg=net_cfg,
            train_cfg=train_cfg,
            pretrain_cfg=pretrain_cfg,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_dataset_spec(spec: str, cache_dir: Path) -> data.PreparedDataset:
    """A spec is a CSV path, a directory with data.csv, or a fetchable id."""
    path = Path(spec)
    if path.is_dir():
        return data.prepare_csv(path / "data.csv", path / "manifest.json",
                                dataset_id=path.name)
    if path.suffix == ".csv" or path.exists():
        return data.prepare_csv(path)
    base_url = os.environ.get(BASE_URL_ENV)
    if not base_url:
        raise data.DatasetError(
            f"{spec!r} is not a local dataset and {BASE_URL_ENV} is unset"
        )
    fetched = data.fetch_dataset(spec, cache_dir, base_url)
    return data.prepare_csv(fetched / "data.csv", fetched / "manifest.json",
                            dataset_id=spec)


def cmd_run(args) -> int:
    try:
        raw_cfg = _load_run_config(args)
        cfg = _validate_run_config(raw_cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    cache_dir = Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "albench"))
    datasets = []
    failures = []
    for spec in raw_cfg["datasets"]:
        try:
            datasets.append(_load_dataset_spec(spec, cache_dir))
        except (data.DatasetError, data.FetchError, OSError) as exc:
            print(f"warning: skipping dataset {spec!r}: {exc}", file=sys.stderr)
            failures.append(spec)
    if not datasets:
        print("error: no datasets could be loaded", file=sys.stderr)
        return 1

    records = loop.run_benchmark(datasets, cfg, raw_cfg["out"])
    n_cells = len(loop.enumerate_cells([d.dataset_id for d in datasets], cfg))
    print(f"completed {n_cells} cells, {len(records)} records "
          f"-> {Path(raw_cfg['out']) / 'records.jsonl'}")
    if failures:
        print(f"{len(failures)} dataset(s) failed to load: {', '.join(failures)}",
              file=sys.stderr)
        return 2
    return 0


def write_reports(records, out_dir: Path, round_override: int | None = None,
                  p_win: float = 0.01, p_gain: float = 0.1) -> list[Path]:
    """Emit win matrix, gains, and curve files for one pretrain arm."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    scenarios = sorted({r.scenario for r in records})
    for scenario in scenarios:
        subset = [r for r in records if r.scenario == scenario]
        round_ = round_override
        if round_ is None:
            round_ = DEFAULT_REPORT_ROUND[scenario]
        methods = sorted({r.strategy_id for r in subset})

        wm = stats.win_matrix(subset, round_, p_threshold=p_win, methods=methods)
        wm_path = out_dir / f"win_matrix_{scenario}_{round_}.json"
        stats.write_win_matrix(wm, wm_path)
        written.append(wm_path)

        gains = [
            stats.relative_gains(subset, m, round_, filter_p=p_gain)
            for m in methods
            if m != stats.RANDOM_BASELINE
        ]
        gains_path = out_dir / f"gains_{scenario}_{round_}.csv"
        stats.write_gains_csv(gains, gains_path)
        written.append(gains_path)

        for dataset_id in sorted({r.dataset_id for r in subset}):
            rows = stats.al_curves(
                [r for r in subset if r.dataset_id == dataset_id], dataset_id,
            )
            curve_path = out_dir / f"curves_{dataset_id}_{scenario}.csv"
            stats.write_curves_csv(rows, curve_path)
            written.append(curve_path)
    return written


def cmd_report(args) -> int:
    records_path = Path(args.records_dir) / "records.jsonl"
    if not records_path.exists():
        print(f"error: {records_path} not found", file=sys.stderr)
        return 1
    records = read_records(records_path)
    out_dir = Path(args.out) if args.out else Path(args.records_dir) / "reports"

    written = []
    scratch = [r for r in records if not r.pretrain]
    pretrained = [r for r in records if r.pretrain]
    if scratch:
        written += write_reports(scratch, out_dir, args.round, args.p_win, args.p_gain)
    if pretrained:
        written += write_reports(pretrained, out_dir / "pretrained", args.round,
                                 args.p_win, args.p_gain)
    for path in written:
        print(path)
    return 0


def cmd_fetch(args) -> int:
    cache_dir = Path(args.cache or os.environ.get(
        CACHE_ENV, Path.home() / ".cache" / "albench"
    ))
    base_url = args.base_url or os.environ.get(BASE_URL_ENV)
    if not base_url:
        print(f"error: no base URL (flag --base-url or {BASE_URL_ENV})",
              file=sys.stderr)
        return 1
    try:
        dest = data.fetch_dataset(args.dataset_id, cache_dir, base_url,
                                  sha256=args.sha256)
    except data.FetchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(dest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="albench",
        description="Active learning benchmark harness for tabular data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark grid")
    run.add_argument("--config", help="JSON run configuration (flags override)")
    run.add_argument("--datasets", help="comma-separated CSV paths or dataset ids")
    run.add_argument("--strategies", help="comma-separated strategy ids")
    run.add_argument("--scenario", choices=sorted(loop.SCENARIOS))
    run.add_argument("--trials", type=int)
    run.add_argument("--pretrain", choices=["on", "off", "both"])
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help="output directory")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="emit statistics files from records")
    report.add_argument("records_dir")
    report.add_argument("--out", help="report output directory")
    report.add_argument("--round", type=int, default=None,
                        help="acquisition round (default mirrors the study)")
    report.add_argument("--p-win", type=float, default=0.01)
    report.add_argument("--p-gain", type=float, default=0.1)
    report.set_defaults(func=cmd_report)

    fetch = sub.add_parser("fetch", help="download and cache a dataset archive")
    fetch.add_argument("dataset_id")
    fetch.add_argument("--cache", help=f"cache directory (or {CACHE_ENV})")
    fetch.add_argument("--base-url", help=f"archive base URL (or {BASE_URL_ENV})")
    fetch.add_argument("--sha256", help="expected archive hash")
    fetch.set_defaults(func=cmd_fetch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
