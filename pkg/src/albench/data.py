"""Tabular dataset ingestion, imputation, encoding, and trial splits.

The pipeline is load_csv -> impute -> encode. Encoding statistics (modes,
means, z-score parameters) are computed over the full dataset; only feature
columns are touched, never labels.
"""

from __future__ import annotations

import csv
import hashlib
import json
import shutil
import urllib.request
import warnings
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CATEGORICAL = "categorical"
NUMERIC = "numeric"


class DatasetError(Exception):
    """Raised for malformed tables, manifests, or invalid encodings."""


class FetchError(Exception):
    """Raised when a remote dataset archive cannot be retrieved or verified."""


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str  # CATEGORICAL or NUMERIC
    categories: tuple[str, ...] = ()  # categorical only, ordered by first appearance
    scale_exempt: bool = False

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise DatasetError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class RawTable:
    """Parsed table: one cell per schema column per row, None = missing."""

    rows: tuple[tuple, ...]
    schema: tuple[ColumnSchema, ...]
    target_column: str

    def __post_init__(self):
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate column names in schema")
        if self.target_column not in names:
            raise DatasetError(f"target column {self.target_column!r} not in schema")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        j = [c.name for c in self.schema].index(name)
        return [row[j] for row in self.rows]

    def feature_schema(self) -> tuple[ColumnSchema, ...]:
        return tuple(c for c in self.schema if c.name != self.target_column)


@dataclass(frozen=True)
class Dataset:
    """Fully encoded dataset: dense real-valued features and class indices."""

    X: np.ndarray  # (n, d) float64, no missing entries
    y: np.ndarray  # (n,) int class indices in [0, n_classes)
    n_classes: int
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise DatasetError("X and y row counts differ")
        if self.n_classes < 2:
            raise DatasetError("dataset must have at least 2 classes")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise DatasetError("labels outside [0, n_classes)")
        if not np.isfinite(self.X).all():
            raise DatasetError("encoded features contain non-finite values")


@dataclass(frozen=True)
class TrialSplit:
    train_idx: np.ndarray
    test_idx: np.ndarray
    trial_seed: int

    def __post_init__(self):
        overlap = np.intersect1d(self.train_idx, self.test_idx)
        if overlap.size:
            raise DatasetError("train/test overlap")


@dataclass(frozen=True)
class TableEncoder:
    """Fitted transform from raw feature values to the encoded matrix.

    Raw features are a float matrix with one column per original feature:
    numeric columns hold values, categorical columns hold category codes
    (position in the schema's category tuple).
    """

    features: tuple[ColumnSchema, ...]
    target_classes: tuple[str, ...]
    # per numeric column: (mean, population std, apply z-score)
    numeric_stats: dict[str, tuple[float, float, bool]] = field(default_factory=dict)

    @property
    def feature_names(self) -> tuple[str, ...]:
        names = []
        for col in self.features:
            if col.kind == CATEGORICAL:
                names.extend(f"{col.name}={cat}" for cat in col.categories)
            else:
                names.append(col.name)
        return tuple(names)

    @property
    def encoded_dim(self) -> int:
        return len(self.feature_names)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Encode a (n, n_raw_features) raw matrix into the dense feature matrix."""
        raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
        if raw.shape[1] != len(self.features):
            raise DatasetError(
                f"raw matrix has {raw.shape[1]} columns, expected {len(self.features)}"
            )
        blocks = []
        for j, col in enumerate(self.features):
            vals = raw[:, j]
            if col.kind == CATEGORICAL:
                codes = vals.astype(np.int64)
                if codes.size and (codes.min() < 0 or codes.max() >= len(col.categories)):
                    raise DatasetError(f"category code out of range for {col.name!r}")
                block = np.zeros((raw.shape[0], len(col.categories)))
                block[np.arange(raw.shape[0]), codes] = 1.0
                blocks.append(block)
            else:
                mean, std, apply_z = self.numeric_stats[col.name]
                if apply_z:
                    # std == 0 means a constant column: encode as all zeros
                    out = (vals - mean) / std if std > 0 else np.zeros_like(vals)
                else:
                    out = vals.copy()
                blocks.append(out[:, None])
        return np.hstack(blocks) if blocks else np.zeros((raw.shape[0], 0))


def load_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if "target" not in manifest or "columns" not in manifest:
        raise DatasetError("manifest must declare 'target' and 'columns'")
    return manifest


def load_csv(path, manifest_path) -> RawTable:
    """Parse a UTF-8 CSV (header row required, empty cell = missing).

    The manifest declares per-column kinds and the target column.  Category
    sets are discovered from the data in order of first appearance.  Columns
    that are missing in every row are dropped with a warning.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    manifest = load_manifest(manifest_path)
    kinds = {c["name"]: c for c in manifest["columns"]}
    target = manifest["target"]

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, header row required") from None
        for name in header:
            if name not in kinds:
                raise DatasetError(f"column {name!r} not declared in manifest")
        if target not in header:
            raise DatasetError(f"target column {target!r} not present in CSV header")

        n_cols = len(header)
        target_j = header.index(target)
        cells: list[list] = [[] for _ in header]
        for i, row in enumerate(reader):
            if len(row) != n_cols:
                raise DatasetError(
                    f"{path}: row {i + 2} has {len(row)} cells, expected {n_cols}"
                )
            if row[target_j].strip() == "":
                raise DatasetError(f"{path}: row {i + 2} rejected, missing target value")
            for j, cell in enumerate(row):
                cells[j].append(cell.strip())

    schema = []
    kept_cols = []
    for j, name in enumerate(header):
        col_cells = cells[j]
        if all(c == "" for c in col_cells):
            warnings.warn(f"column {name!r} is always missing and was dropped")
            continue
        kind = kinds[name].get("kind", CATEGORICAL)
        exempt = bool(kinds[name].get("scale_exempt", False))
        if kind == NUMERIC and name != target:
            parsed = []
            for i, c in enumerate(col_cells):
                if c == "":
                    parsed.append(None)
                else:
                    try:
                        parsed.append(float(c))
                    except ValueError:
                        raise DatasetError(
                            f"{path}: row {i + 2}, column {name!r}: "
                            f"non-numeric value {c!r}"
                        ) from None
            schema.append(ColumnSchema(name, NUMERIC, scale_exempt=exempt))
            kept_cols.append(parsed)
        else:
            values = [None if c == "" else c for c in col_cells]
            seen: dict[str, None] = {}
            for v in values:
                if v is not None and v not in seen:
                    seen[v] = None
            schema.append(ColumnSchema(name, CATEGORICAL, categories=tuple(seen)))
            kept_cols.append(values)

    rows = tuple(zip(*kept_cols)) if kept_cols else ()
    return RawTable(rows=rows, schema=tuple(schema), target_column=target)


def impute(table: RawTable) -> RawTable:
    """Fill missing cells: categorical by mode, numeric by mean (full dataset).

    Mode ties break toward the first-appearing category.
    """
    fills = {}
    for col in table.schema:
        if col.name == table.target_column:
            continue
        values = table.column(col.name)
        if col.kind == CATEGORICAL:
            counts = {cat: 0 for cat in col.categories}
            for v in values:
                if v is not None:
                    counts[v] += 1
            fills[col.name] = max(col.categories, key=lambda c: counts[c])
        else:
            present = [v for v in values if v is not None]
            fills[col.name] = float(np.mean(present))

    names = [c.name for c in table.schema]
    new_rows = []
    for row in table.rows:
        new_rows.append(
            tuple(
                fills[names[j]] if cell is None else cell
                for j, cell in enumerate(row)
            )
        )
    return replace(table, rows=tuple(new_rows))


def fit_encoder(table: RawTable, zscore: dict[str, bool] | None = None) -> TableEncoder:
    """Fit the raw-to-dense encoding from a complete (imputed) table.

    `zscore` optionally overrides, per numeric column, whether z-scoring is
    applied; the default follows the schema's scale_exempt flags.
    """
    targets = table.column(table.target_column)
    classes: dict[str, None] = {}
    for v in targets:
        if v not in classes:
            classes[v] = None
    if len(classes) < 2:
        raise DatasetError(f"dataset has {len(classes)} target class(es), need >= 2")

    stats = {}
    for col in table.feature_schema():
        if col.kind != NUMERIC:
            continue
        values = np.array(table.column(col.name), dtype=np.float64)
        if np.isnan(values).any():
            raise DatasetError(f"column {col.name!r} still has missing values")
        apply_z = not col.scale_exempt
        if zscore is not None and col.name in zscore:
            apply_z = zscore[col.name]
        stats[col.name] = (float(values.mean()), float(values.std()), apply_z)

    return TableEncoder(
        features=table.feature_schema(),
        target_classes=tuple(classes),
        numeric_stats=stats,
    )


def raw_feature_matrix(table: RawTable) -> np.ndarray:
    """Feature columns as a float matrix (categorical cells become codes)."""
    cols = []
    for col in table.feature_schema():
        values = table.column(col.name)
        if col.kind == CATEGORICAL:
            code = {cat: k for k, cat in enumerate(col.categories)}
            cols.append([float(code[v]) for v in values])
        else:
            cols.append([float("nan") if v is None else float(v) for v in values])
    if not cols:
        return np.zeros((table.n_rows, 0))
    return np.array(cols, dtype=np.float64).T


def encode(table: RawTable, zscore: dict[str, bool] | None = None) -> Dataset:
    """One-hot categoricals, z-score non-exempt numerics, densify labels."""
    encoder = fit_encoder(table, zscore=zscore)
    raw = raw_feature_matrix(table)
    if np.isnan(raw).any():
        raise DatasetError("table has missing cells; run impute() first")
    X = encoder.transform(raw)
    label_of = {cls: k for k, cls in enumerate(encoder.target_classes)}
    y = np.array([label_of[v] for v in table.column(table.target_column)], dtype=np.int64)
    return Dataset(
        X=X,
        y=y,
        n_classes=len(encoder.target_classes),
        feature_names=encoder.feature_names,
        class_names=encoder.target_classes,
    )


def make_split(dataset: Dataset, trial_seed: int) -> TrialSplit:
    """Uniform 80/20 train/test partition, fully determined by trial_seed."""
    n = dataset.X.shape[0]
    if n < 5:
        raise DatasetError(f"need at least 5 rows to split, got {n}")
    n_train = int(round(0.8 * n))
    perm = np.random.default_rng(trial_seed).permutation(n)
    return TrialSplit(
        train_idx=np.sort(perm[:n_train]),
        test_idx=np.sort(perm[n_train:]),
        trial_seed=trial_seed,
    )


@dataclass(frozen=True)
class PreparedDataset:
    """Everything a benchmark trial needs: encoded data plus the raw view
    (used by feature-corruption pre-training)."""

    dataset_id: str
    data: Dataset
    raw: np.ndarray  # (n, n_raw_features) raw feature matrix
    encoder: TableEncoder


def prepare_csv(path, manifest_path=None, dataset_id=None) -> PreparedDataset:
    """Load, impute, and encode a CSV dataset.

    The manifest defaults to `<stem>.manifest.json` next to the CSV.
    """
    path = Path(path)
    if manifest_path is None:
        manifest_path = path.with_name(path.stem + ".manifest.json")
    table = impute(load_csv(path, manifest_path))
    encoder = fit_encoder(table)
    raw = raw_feature_matrix(table)
    X = encoder.transform(raw)
    label_of = {cls: k for k, cls in enumerate(encoder.target_classes)}
    y = np.array([label_of[v] for v in table.column(table.target_column)], dtype=np.int64)
    data = Dataset(
        X=X,
        y=y,
        n_classes=len(encoder.target_classes),
        feature_names=encoder.feature_names,
        class_names=encoder.target_classes,
    )
    return PreparedDataset(
        dataset_id=dataset_id or path.stem,
        data=data,
        raw=raw,
        encoder=encoder,
    )


def fetch_dataset(dataset_id: str, cache_dir, base_url: str, sha256: str | None = None) -> Path:
    """Download and cache `<base_url>/<id>.zip`; returns the extracted directory.

    A cache hit never touches the network.  A hash mismatch quarantines the
    download and raises.
    """
    cache_dir = Path(cache_dir)
    dest = cache_dir / dataset_id
    marker = dest / ".complete"
    if marker.exists():
        return dest

    cache_dir.mkdir(parents=True, exist_ok=True)
    url = base_url.rstrip("/") + f"/{dataset_id}.zip"
    tmp = cache_dir / f"{dataset_id}.zip.part"
    try:
        with urllib.request.urlopen(url) as resp, open(tmp, "wb") as out:
            shutil.copyfileobj(resp, out)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise FetchError(f"download failed for {url}: {exc}") from exc

    if sha256 is not None:
        digest = hashlib.sha256(tmp.read_bytes()).hexdigest()
        if digest != sha256:
            quarantine = cache_dir / f"{dataset_id}.zip.quarantined"
            tmp.replace(quarantine)
            raise FetchError(
                f"hash mismatch for {dataset_id}: expected {sha256}, got {digest}; "
                f"download quarantined at {quarantine}"
            )

    if dest.exists():
        shutil.rmtree(dest)
    dest.mkdir(parents=True)
    try:
        with zipfile.ZipFile(tmp) as zf:
            zf.extractall(dest)
    except zipfile.BadZipFile as exc:
        raise FetchError(f"corrupt archive for {dataset_id}") from exc
    finally:
        tmp.unlink(missing_ok=True)
    marker.touch()
    return dest
