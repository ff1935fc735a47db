"""Benchmark evaluation statistics: Welch's t-test, win matrices, gains, curves.

The t-distribution tail is evaluated through a self-contained regularized
incomplete beta function, so the library carries no statistics dependency.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .records import TrialRecord

_BETA_EPS = 1e-12
_BETA_MAX_ITER = 400
_FPMIN = 1e-300

RANDOM_BASELINE = "random"


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    warnings.warn("incomplete beta continued fraction did not converge")
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Survival function of Student's t for t >= 0."""
    if t < 0:
        raise ValueError("t_sf expects t >= 0")
    if math.isinf(t):
        return 0.0
    return 0.5 * betainc_reg(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float


def welch_t_test(a, b) -> WelchResult:
    """Two-sided Welch's t-test (unequal variances, Welch-Satterthwaite df)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("both samples need at least 2 observations")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    diff = a.mean() - b.mean()
    if va == 0.0 and vb == 0.0:
        if diff == 0.0:
            return WelchResult(t=0.0, df=float(na + nb - 2), p=1.0)
        t = math.copysign(math.inf, diff)
        return WelchResult(t=t, df=float(na + nb - 2), p=0.0)
    sa, sb = va / na, vb / nb
    se = math.sqrt(sa + sb)
    t = float(diff / se)
    df = float((sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1)))
    p = 2.0 * t_sf(abs(t), df)
    return WelchResult(t=t, df=df, p=float(min(p, 1.0)))


@dataclass(frozen=True)
class WinMatrix:
    methods: tuple[str, ...]
    wins: np.ndarray  # (M, M) int, wins[i, j] = datasets where i beats j
    decided: np.ndarray  # wins[i, j] + wins[j, i]
    round: int
    p_threshold: float
    n_datasets: int

    def entry(self, i: int, j: int) -> tuple[int, int]:
        return int(self.wins[i, j]), int(self.decided[i, j])

    def to_dict(self) -> dict:
        entries = []
        for i in range(len(self.methods)):
            row = []
            for j in range(len(self.methods)):
                if i == j:
                    row.append(None)
                else:
                    row.append({"wins": int(self.wins[i, j]),
                                "decided": int(self.decided[i, j])})
            entries.append(row)
        return {
            "methods": list(self.methods),
            "round": self.round,
            "p_threshold": self.p_threshold,
            "n_datasets": self.n_datasets,
            "entries": entries,
        }


def format_entry(wins: int, decided: int) -> str:
    """Fractional rendering; an em-dash marks pairs with nothing decided."""
    if decided == 0:
        return "—"
    return f"{wins}/{decided}"


def _samples_by_cell(records, round_):
    """(dataset, method) -> accuracy sample across trials at the given round."""
    cells = defaultdict(list)
    for rec in records:
        if rec.round == round_:
            cells[(rec.dataset_id, rec.strategy_id)].append(rec.test_accuracy)
    return cells


def win_matrix(records: list[TrialRecord], round: int,
               p_threshold: float = 0.01,
               methods: list[str] | None = None) -> WinMatrix:
    """Pairwise significant-win counts across datasets at one round.

    Datasets whose records do not reach the round (training set exhausted)
    or have fewer than two trials are omitted.
    """
    cells = _samples_by_cell(records, round)
    if methods is None:
        methods = sorted({m for _, m in cells})
    datasets = sorted({d for d, _ in cells})
    usable = [
        d for d in datasets
        if all(len(cells.get((d, m), [])) >= 2 for m in methods)
    ]
    m_count = len(methods)
    wins = np.zeros((m_count, m_count), dtype=np.int64)
    for d in usable:
        for i in range(m_count):
            for j in range(i + 1, m_count):
                a = cells[(d, methods[i])]
                b = cells[(d, methods[j])]
                res = welch_t_test(a, b)
                if res.p < p_threshold:
                    if float(np.mean(a)) > float(np.mean(b)):
                        wins[i, j] += 1
                    else:
                        wins[j, i] += 1
    return WinMatrix(
        methods=tuple(methods),
        wins=wins,
        decided=wins + wins.T,
        round=round,
        p_threshold=p_threshold,
        n_datasets=len(usable),
    )


@dataclass(frozen=True)
class GainEntry:
    dataset_id: str
    gain: float  # relative percent improvement over the random baseline
    p: float
    significant: bool


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float

    @classmethod
    def from_values(cls, values) -> "BoxStats":
        v = np.asarray(values, dtype=np.float64)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
        return cls(
            median=float(med),
            q1=float(q1),
            q3=float(q3),
            whisker_lo=float(inside.min()),
            whisker_hi=float(inside.max()),
        )


@dataclass(frozen=True)
class GainSummary:
    method: str
    round: int
    filter_p: float
    entries: tuple[GainEntry, ...] = ()
    box: BoxStats | None = None
    box_filtered: BoxStats | None = None

    @property
    def filtered_entries(self) -> tuple[GainEntry, ...]:
        return tuple(e for e in self.entries if e.significant)


def relative_gains(records: list[TrialRecord], method: str, round: int,
                   filter_p: float = 0.1,
                   baseline: str = RANDOM_BASELINE) -> GainSummary:
    """Per-dataset relative percent improvement of `method` over the baseline."""
    cells = _samples_by_cell(records, round)
    datasets = sorted({d for d, m in cells if m == method})
    entries = []
    for d in datasets:
        a = cells.get((d, method), [])
        b = cells.get((d, baseline), [])
        if len(a) < 2 or len(b) < 2:
            continue
        base_mean = float(np.mean(b))
        if base_mean <= 0.0:
            warnings.warn(f"baseline mean accuracy is 0 on {d!r}; gain undefined")
            continue
        gain = 100.0 * (float(np.mean(a)) - base_mean) / base_mean
        p = welch_t_test(a, b).p
        entries.append(GainEntry(d, gain, p, significant=p < filter_p))
    box = BoxStats.from_values([e.gain for e in entries]) if entries else None
    filt = [e.gain for e in entries if e.significant]
    return GainSummary(
        method=method,
        round=round,
        filter_p=filter_p,
        entries=tuple(entries),
        box=box,
        box_filtered=BoxStats.from_values(filt) if filt else None,
    )


@dataclass(frozen=True)
class CurveRow:
    strategy: str
    round: int
    mean: float
    stderr: float


def al_curves(records: list[TrialRecord], dataset: str,
              strategies: list[str] | None = None) -> list[CurveRow]:
    """Per-round mean accuracy with standard error across trials."""
    cells = defaultdict(list)
    for rec in records:
        if rec.dataset_id == dataset:
            cells[(rec.strategy_id, rec.round)].append(rec.test_accuracy)
    if strategies is None:
        strategies = sorted({s for s, _ in cells})
    rows = []
    for strat in strategies:
        rounds = sorted(r for s, r in cells if s == strat)
        for r in rounds:
            vals = np.asarray(cells[(strat, r)], dtype=np.float64)
            stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
            rows.append(CurveRow(strat, r, float(vals.mean()), stderr))
    return rows


def write_win_matrix(wm: WinMatrix, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(wm.to_dict(), fh, indent=2)
        fh.write("\n")


def write_gains_csv(summaries: list[GainSummary], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "dataset", "gain", "p", "filtered"])
        for summary in summaries:
            for e in summary.entries:
                writer.writerow([
                    summary.method, e.dataset_id, repr(float(e.gain)),
                    repr(float(e.p)), "true" if e.significant else "false",
                ])


def write_curves_csv(rows: list[CurveRow], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "round", "mean", "stderr"])
        for row in rows:
            writer.writerow([row.strategy, row.round, repr(float(row.mean)),
                             repr(float(row.stderr))])
