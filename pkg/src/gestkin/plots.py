"""Static SVG figures from a token table.

Three views: the lag-vs-duration scatter grid with per-cell regression lines
(the coordination diagnostic), lag distributions by condition, and TB
position distributions by condition and by speaker. Text is kept as SVG text
elements so annotations stay machine-checkable, and the slope annotations are
computed from the same CSV values the summary table uses, so both agree to
the last printed digit.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import stats
from .score import CONDITIONS

plt.rcParams["svg.fonttype"] = "none"

_POINT = dict(marker="o", linestyle="", markersize=2.5, alpha=0.55, color="#33658a")
_EXCLUDED = dict(marker="x", linestyle="", markersize=3.5, alpha=0.7, color="#b0b0b0")
_LINE = dict(color="#d1495b", linewidth=1.4)


def _included(tokens, speaker=None, condition=None):
    out = []
    for t in tokens:
        if t.excluded or not math.isfinite(t.lag_ms):
            continue
        if speaker is not None and t.speaker != speaker:
            continue
        if condition is not None and t.condition != condition:
            continue
        out.append(t)
    return out


def _scatter_grid(tokens, speakers, conditions, path: Path) -> None:
    n_rows, n_cols = len(speakers), len(conditions)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(3.1 * n_cols, 2.6 * n_rows), squeeze=False
    )
    for r, sp in enumerate(speakers):
        for c, cond in enumerate(conditions):
            ax = axes[r][c]
            cell = _included(tokens, sp, cond)
            dur = [t.g1_duration_ms for t in cell]
            lag = [t.lag_ms for t in cell]
            dropped = [
                t
                for t in tokens
                if t.speaker == sp
                and t.condition == cond
                and t.excluded
                and math.isfinite(t.lag_ms)
            ]
            ax.plot(dur, lag, **_POINT)
            if dropped:
                ax.plot(
                    [t.g1_duration_ms for t in dropped],
                    [t.lag_ms for t in dropped],
                    **_EXCLUDED,
                )
            note = "slope: n/a"
            try:
                fit = stats.ols(dur, lag)
                xs = np.array([min(dur), max(dur)])
                ax.plot(xs, fit.slope * xs + fit.intercept, **_LINE)
                note = f"slope={fit.slope:.3f}"
            except ValueError:
                pass
            ax.annotate(
                note,
                xy=(0.04, 0.92),
                xycoords="axes fraction",
                fontsize=8,
                va="top",
            )
            if r == 0:
                ax.set_title(cond, fontsize=9)
            if c == 0:
                ax.set_ylabel(f"{sp}\nlag (ms)", fontsize=8)
            if r == n_rows - 1:
                ax.set_xlabel("G1 duration (ms)", fontsize=8)
            ax.tick_params(labelsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _box_by_condition(tokens, conditions, attr, ylabel, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(1.6 + 1.3 * len(conditions), 3.2))
    data = [[getattr(t, attr) for t in _included(tokens, condition=c)] for c in conditions]
    ax.boxplot(data)
    ax.set_xticks(range(1, len(conditions) + 1))
    ax.set_xticklabels(list(conditions), fontsize=8)
    ax.set_ylabel(ylabel, fontsize=9)
    ax.tick_params(labelsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _box_by_speaker(tokens, speakers, conditions, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(1.8 + 1.1 * len(speakers) * len(conditions), 3.4))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    step = len(conditions) + 1
    for c, cond in enumerate(conditions):
        data = [[t.tb_pos_z for t in _included(tokens, sp, cond)] for sp in speakers]
        positions = [s * step + c for s in range(len(speakers))]
        box = ax.boxplot(data, positions=positions, widths=0.8, patch_artist=True)
        for patch in box["boxes"]:
            patch.set_facecolor(colors[c % len(colors)])
            patch.set_alpha(0.6)
        ax.plot([], [], color=colors[c % len(colors)], label=cond)
    ax.set_xticks([s * step + (len(conditions) - 1) / 2 for s in range(len(speakers))])
    ax.set_xticklabels(speakers, fontsize=8)
    ax.set_ylabel("TB position (z)", fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_plots(tokens_csv: str | Path, out_dir: str | Path) -> dict[str, str]:
    """Render the three figure families from a token CSV into out_dir.

    Returns {figure name: path}. Raises ValueError when the table has no
    includable tokens; single-valued distributions render as degenerate
    boxes rather than failing.
    """
    tokens = stats.read_token_csv(tokens_csv)
    if not _included(tokens):
        raise ValueError(f"no includable tokens in {tokens_csv}")
    speakers = sorted({t.speaker for t in tokens})
    conditions = [c for c in CONDITIONS if any(t.condition == c for t in tokens)]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    paths = {
        "lag_vs_duration": out / "lag_vs_duration.svg",
        "lag_by_condition": out / "lag_by_condition.svg",
        "tb_by_condition": out / "tb_by_condition.svg",
        "tb_by_speaker": out / "tb_by_speaker.svg",
    }
    _scatter_grid(tokens, speakers, conditions, paths["lag_vs_duration"])
    _box_by_condition(tokens, conditions, "lag_ms", "lag (ms)", paths["lag_by_condition"])
    _box_by_condition(tokens, conditions, "tb_pos_z", "TB position (z)", paths["tb_by_condition"])
    _box_by_speaker(tokens, speakers, conditions, paths["tb_by_speaker"])
    return {name: str(p) for name, p in paths.items()}
