"""Trial record schema and the JSON-lines report stream."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

RECORD_FIELDS = (
    "dataset_id",
    "strategy_id",
    "scenario",
    "pretrain",
    "trial",
    "round",
    "labeled_count",
    "test_accuracy",
    "wall_time",
)


@dataclass(frozen=True)
class TrialRecord:
    dataset_id: str
    strategy_id: str
    scenario: str
    pretrain: bool
    trial: int
    round: int
    labeled_count: int
    test_accuracy: float
    wall_time: float

    def __post_init__(self):
        if not 0.0 <= self.test_accuracy <= 1.0:
            raise ValueError(f"test_accuracy {self.test_accuracy} outside [0, 1]")

    def to_line(self) -> str:
        d = asdict(self)
        return json.dumps({k: d[k] for k in RECORD_FIELDS})

    @classmethod
    def from_line(cls, line: str) -> "TrialRecord":
        return cls(**json.loads(line))


def write_records(path, records, mode: str = "w"):
    with open(path, mode, encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_line() + "\n")


def read_records(path) -> list[TrialRecord]:
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(TrialRecord.from_line(line))
    return records
