"""Figure rendering for win matrices, gain box plots, and AL curves.

Figures are drawn fully in memory and written in one shot, so a failure can
never leave a partial image on disk.  SVG output is deterministic (fixed
hash salt, no embedded date) to support golden-file comparisons.
"""

from __future__ import annotations

import io
import warnings
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .schemas import read_curves, read_gains, read_win_matrix  # noqa: E402

EM_DASH = "—"
_SVG_RC = {"svg.hashsalt": "plotviz", "svg.fonttype": "none"}


def _save(fig, out_path):
    out_path = Path(out_path)
    fmt = (out_path.suffix.lstrip(".") or "svg").lower()
    buf = io.BytesIO()
    try:
        with plt.rc_context(_SVG_RC):
            kwargs = {"metadata": {"Date": None}} if fmt == "svg" else {}
            fig.savefig(buf, format=fmt, bbox_inches="tight", **kwargs)
    finally:
        plt.close(fig)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(buf.getvalue())


def render_win_heatmap(win_json, out_image):
    """Fraction-annotated heat map of pairwise significant wins."""
    wm = read_win_matrix(win_json)
    m = len(wm.methods)
    ratio = np.full((m, m), np.nan)
    for i in range(m):
        for j in range(m):
            if i != j and wm.decided[i][j]:
                ratio[i, j] = wm.wins[i][j] / wm.decided[i][j]

    fig, ax = plt.subplots(figsize=(1.1 * m + 2.2, 1.0 * m + 1.6))
    masked = np.ma.masked_invalid(ratio)
    cmap = plt.get_cmap("RdYlGn").copy()
    cmap.set_bad("0.92")
    image = ax.imshow(masked, cmap=cmap, vmin=0.0, vmax=1.0)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            wins, decided = wm.wins[i][j], wm.decided[i][j]
            label = EM_DASH if decided == 0 else f"{wins}/{decided}"
            dark = decided and 0.25 < wins / decided < 0.8
            ax.text(j, i, label, ha="center", va="center", fontsize=9,
                    color="black" if dark else "0.15")
    ax.set_xticks(range(m), wm.methods, rotation=45, ha="right", fontsize=9)
    ax.set_yticks(range(m), wm.methods, fontsize=9)
    ax.set_title(f"wins / decided at round {wm.round} "
                 f"(p < {wm.p_threshold:g}, {wm.n_datasets} datasets)")
    fig.colorbar(image, ax=ax, fraction=0.046, label="win ratio")
    _save(fig, out_image)
    return wm


def box_stats(values) -> dict:
    """Quartiles and Tukey whiskers for one box."""
    v = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {
        "med": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "whislo": float(inside.min()),
        "whishi": float(inside.max()),
        "n": int(v.size),
    }


def render_box(gains_csv, filtered: bool, out_image):
    """Per-method box plot of relative gains, datasets overlaid as points.

    With `filtered`, only rows flagged significant (p below the gain
    threshold) are kept.
    """
    rows = read_gains(gains_csv)
    if filtered:
        rows = [r for r in rows if r.filtered]
    methods = sorted({r.method for r in rows})
    by_method = {m: [r.gain for r in rows if r.method == m] for m in methods}

    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(methods) + 1.5), 4.2))
    title = "relative gain over random, %" + (" (significant only)" if filtered
                                              else "")
    ax.set_title(title)
    if not rows:
        ax.text(0.5, 0.5, "no datasets to plot", ha="center", va="center",
                transform=ax.transAxes, fontsize=12, color="0.4")
        ax.set_xticks([])
        _save(fig, out_image)
        return {}

    stats = {m: box_stats(by_method[m]) for m in methods}
    ax.bxp(
        [
            {"label": m, **{k: v for k, v in stats[m].items() if k != "n"},
             "fliers": []}
            for m in methods
        ],
        showfliers=False,
    )
    jitter = np.random.default_rng(0)
    for k, m in enumerate(methods):
        gains = np.asarray(by_method[m])
        x = k + 1 + jitter.uniform(-0.12, 0.12, size=gains.size)
        ax.plot(x, gains, linestyle="none", marker="o", markersize=3,
                alpha=0.6, color="tab:blue")
    ax.axhline(0.0, color="0.6", linewidth=0.8, linestyle="--")
    ax.set_ylabel("gain over random (%)")
    _save(fig, out_image)
    return stats


def render_curves(curves_csv, out_image, strategies=None):
    """Mean accuracy with a standard-error band per strategy across rounds."""
    rows = read_curves(curves_csv)
    present = sorted({r.strategy for r in rows})
    if strategies is None:
        strategies = present
    series = {}
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    for strategy in strategies:
        picked = sorted((r for r in rows if r.strategy == strategy),
                        key=lambda r: r.round)
        if not picked:
            warnings.warn(f"strategy {strategy!r} missing from "
                          f"{Path(curves_csv).name}; skipped")
            continue
        rounds = np.array([r.round for r in picked])
        means = np.array([r.mean for r in picked])
        errs = np.array([r.stderr for r in picked])
        line, = ax.plot(rounds, means, marker="o", markersize=3, label=strategy)
        ax.fill_between(rounds, means - errs, means + errs, alpha=0.2,
                        color=line.get_color())
        series[strategy] = (rounds.tolist(), means.tolist(), errs.tolist())
    ax.set_xlabel("acquisition round")
    ax.set_ylabel("test accuracy")
    ax.legend(fontsize=8)
    ax.set_title(Path(curves_csv).stem.removeprefix("curves_"))
    _save(fig, out_image)
    return series
