"""Readers for the benchmark report file formats.

Every reader validates fully before anything is rendered; violations raise
SchemaError naming the offending field.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path


class SchemaError(ValueError):
    """A report file does not match its declared schema."""


@dataclass(frozen=True)
class WinMatrixFile:
    methods: list[str]
    round: int
    p_threshold: float
    n_datasets: int
    wins: list[list[int | None]]
    decided: list[list[int | None]]


@dataclass(frozen=True)
class GainRow:
    method: str
    dataset: str
    gain: float
    p: float
    filtered: bool


@dataclass(frozen=True)
class CurveRow:
    strategy: str
    round: int
    mean: float
    stderr: float


def _require(data: dict, field: str, kind, where: str):
    if field not in data:
        raise SchemaError(f"{where}: missing field {field!r}")
    value = data[field]
    if not isinstance(value, kind):
        raise SchemaError(f"{where}: field {field!r} has type "
                          f"{type(value).__name__}, expected {kind.__name__}")
    return value


def read_win_matrix(path) -> WinMatrixFile:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: not valid JSON ({exc})") from exc
    where = path.name
    methods = _require(data, "methods", list, where)
    if not methods or not all(isinstance(m, str) for m in methods):
        raise SchemaError(f"{where}: field 'methods' must be a nonempty string list")
    round_ = _require(data, "round", int, where)
    p_threshold = float(_require(data, "p_threshold", (int, float), where))
    n_datasets = _require(data, "n_datasets", int, where)
    entries = _require(data, "entries", list, where)
    m = len(methods)
    if len(entries) != m:
        raise SchemaError(f"{where}: field 'entries' has {len(entries)} rows, "
                          f"expected {m}")
    wins: list[list[int | None]] = []
    decided: list[list[int | None]] = []
    for i, row in enumerate(entries):
        if not isinstance(row, list) or len(row) != m:
            raise SchemaError(f"{where}: field 'entries[{i}]' must be a row of {m}")
        w_row: list[int | None] = []
        d_row: list[int | None] = []
        for j, cell in enumerate(row):
            loc = f"entries[{i}][{j}]"
            if i == j:
                if cell is not None:
                    raise SchemaError(f"{where}: field '{loc}' must be null "
                                      "on the diagonal")
                w_row.append(None)
                d_row.append(None)
                continue
            if not isinstance(cell, dict):
                raise SchemaError(f"{where}: field '{loc}' must be an object")
            w = _require(cell, "wins", int, f"{where}: {loc}")
            d = _require(cell, "decided", int, f"{where}: {loc}")
            if w < 0 or d < 0 or w > d:
                raise SchemaError(f"{where}: field '{loc}' has wins={w}, "
                                  f"decided={d}")
            w_row.append(w)
            d_row.append(d)
        wins.append(w_row)
        decided.append(d_row)
    return WinMatrixFile(methods, round_, p_threshold, n_datasets, wins, decided)


def _read_csv(path, expected_header: list[str]):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty file, header required") from None
        if header != expected_header:
            raise SchemaError(f"{path.name}: header {header} does not match "
                              f"{expected_header}")
        return list(reader)


def _parse_float(value: str, field: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SchemaError(f"{where}: field {field!r} has non-numeric value "
                          f"{value!r}") from None


def read_gains(path) -> list[GainRow]:
    rows = []
    for k, row in enumerate(_read_csv(path, ["method", "dataset", "gain", "p",
                                             "filtered"])):
        where = f"{Path(path).name}: row {k + 2}"
        if len(row) != 5:
            raise SchemaError(f"{where}: expected 5 cells, got {len(row)}")
        if row[4] not in ("true", "false"):
            raise SchemaError(f"{where}: field 'filtered' must be true/false, "
                              f"got {row[4]!r}")
        rows.append(GainRow(
            method=row[0],
            dataset=row[1],
            gain=_parse_float(row[2], "gain", where),
            p=_parse_float(row[3], "p", where),
            filtered=row[4] == "true",
        ))
    return rows


def read_curves(path) -> list[CurveRow]:
    rows = []
    for k, row in enumerate(_read_csv(path, ["strategy", "round", "mean",
                                             "stderr"])):
        where = f"{Path(path).name}: row {k + 2}"
        if len(row) != 4:
            raise SchemaError(f"{where}: expected 4 cells, got {len(row)}")
        try:
            round_ = int(row[1])
        except ValueError:
            raise SchemaError(f"{where}: field 'round' has non-integer value "
                              f"{row[1]!r}") from None
        rows.append(CurveRow(
            strategy=row[0],
            round=round_,
            mean=_parse_float(row[2], "mean", where),
            stderr=_parse_float(row[3], "stderr", where),
        ))
    return rows
