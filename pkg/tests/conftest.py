import csv
import json
from pathlib import Path

import numpy as np

from albench.data import CATEGORICAL, NUMERIC, ColumnSchema, RawTable
from albench.net import NetConfig, TrainConfig

# small float64 configs keep unit tests fast and gradient checks exact
TINY_NET = NetConfig(backbone_layers=2, hidden_units=16, n_classes=2, dtype="float64")
TINY_TRAIN = TrainConfig(epochs=10, batch_size=32, rng_seed=0)


def make_table(columns, target="label", target_values=None):
    """Build a RawTable from {name: (kind, values)} plus target labels."""
    names = list(columns)
    schema = []
    for name in names:
        kind, values = columns[name]
        if kind == CATEGORICAL:
            seen = {}
            for v in values:
                if v is not None and v not in seen:
                    seen[v] = None
            schema.append(ColumnSchema(name, CATEGORICAL, categories=tuple(seen)))
        else:
            schema.append(ColumnSchema(name, NUMERIC))
    if target_values is None:
        n = len(columns[names[0]][1])
        target_values = ["pos" if i % 2 else "neg" for i in range(n)]
    seen = {}
    for v in target_values:
        if v not in seen:
            seen[v] = None
    schema.append(ColumnSchema(target, CATEGORICAL, categories=tuple(seen)))
    rows = tuple(
        tuple(columns[name][1][i] for name in names) + (target_values[i],)
        for i in range(len(target_values))
    )
    return RawTable(rows=rows, schema=tuple(schema), target_column=target)


def write_csv_dataset(dir_path, name, X, y, class_names=None) -> Path:
    """Write a numeric-feature CSV plus its manifest; returns the CSV path."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    X = np.asarray(X)
    y = np.asarray(y)
    if class_names is None:
        class_names = [f"c{k}" for k in range(int(y.max()) + 1)]
    csv_path = dir_path / f"{name}.csv"
    feature_names = [f"f{j}" for j in range(X.shape[1])]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(feature_names + ["label"])
        for i in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[i]] + [class_names[y[i]]])
    manifest = {
        "target": "label",
        "columns": [{"name": n, "kind": "numeric"} for n in feature_names]
        + [{"name": "label", "kind": "categorical"}],
    }
    (dir_path / f"{name}.manifest.json").write_text(json.dumps(manifest))
    return csv_path


def two_gaussians(n, d, separation, seed, informative=5):
    """Balanced two-class Gaussian blobs with signal in a few dimensions."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = rng.normal(size=(n, d))
    shift = np.zeros(d)
    shift[:informative] = separation / (2.0 * np.sqrt(informative))
    X[:half] += shift
    X[half:] -= shift
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    perm = rng.permutation(n)
    return X[perm], y[perm]


def rotated_two_gaussians(n, d, class_gap, signal_std, noise_std, seed):
    """Two Gaussians separated along one hidden (rotated) axis.

    The class axis is tight (signal_std) while every other direction carries
    large nuisance variance, so a small-sample model is estimation-limited
    even though the classes barely overlap.
    """
    rng = np.random.default_rng(seed)
    half = n // 2
    Z = noise_std * rng.normal(size=(n, d))
    Z[:half, 0] = class_gap + signal_std * rng.normal(size=half)
    Z[half:, 0] = -class_gap + signal_std * rng.normal(size=n - half)
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    perm = rng.permutation(n)
    return (Z @ Q)[perm], y[perm]
