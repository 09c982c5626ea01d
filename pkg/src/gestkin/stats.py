"""Token-level measurement records and the statistics over them.

The unit of analysis is one simulated token: one G1 plateau (duration), one
G1-to-G2 onset lag, and one tongue-body position probe. Everything downstream
(outlier screening, z-scoring, per-cell regressions, permutation tests, the
coordination-mode classification) operates on these records, and always on
the values as they appear in the token CSV, so that re-reading a written
table reproduces the analysis bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

OUTLIER_SD = 3.0

# classification thresholds on the pooled z-z regression
SEQ_MAX_P = 0.01
SEQ_MIN_R2 = 0.25
COMPLEX_MIN_P = 0.05
COMPLEX_MAX_R2 = 0.10
MIN_CLASSIFY_TOKENS = 20

TOKEN_FIELDS = (
    "speaker",
    "condition",
    "item",
    "rep",
    "g1_onset_ms",
    "g1_offset_ms",
    "g2_onset_ms",
    "g1_duration_ms",
    "lag_ms",
    "tb_pos_mm",
    "tb_pos_z",
    "excluded",
    "exclusion_reason",
)

SUMMARY_FIELDS = (
    "speaker",
    "condition",
    "n",
    "slope",
    "intercept",
    "r2",
    "p_perm",
    "mean_lag_ms",
    "mean_tb_z",
)


@dataclass(frozen=True)
class TokenRecord:
    speaker: str
    condition: str
    item: str
    rep: int
    g1_onset_ms: float
    g1_offset_ms: float
    g2_onset_ms: float
    g1_duration_ms: float
    lag_ms: float
    tb_pos_mm: float
    tb_pos_z: float = math.nan
    excluded: bool = False
    exclusion_reason: str = ""


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r2: float
    n: int
    p_perm: float | None = None


def intervals(g1, g2) -> tuple[float, float]:
    """(G1 duration, G1-to-G2 onset lag) from two landmark sets.

    Duration runs from movement onset to the end of release; lag is the
    difference of the two onsets and may be negative when G2 leads.
    """
    return g1.offset_ms - g1.onset_ms, g2.onset_ms - g1.onset_ms


def tb_at(trajectory, t_ms: float) -> float:
    """Trajectory position at t_ms by linear interpolation between samples."""
    t = trajectory.times_ms
    if not (t[0] - 1e-9 <= t_ms <= t[-1] + 1e-9):
        raise ValueError(f"t={t_ms} ms outside trajectory [{t[0]}, {t[-1]}]")
    return float(np.interp(t_ms, t, trajectory.samples))


def zscore_by_group(values: Sequence[float], groups: Sequence) -> np.ndarray:
    """Z-score values within each group (sample SD, ddof=1).

    A group with fewer than two members or zero spread has no usable scale;
    that's an error here, callers that tolerate it must handle it themselves.
    """
    v = np.asarray(values, dtype=float)
    if len(v) != len(groups):
        raise ValueError("values and groups differ in length")
    out = np.empty_like(v)
    for g in sorted(set(groups), key=str):
        mask = np.array([x == g for x in groups])
        block = v[mask]
        if block.size < 2:
            raise ValueError(f"group {g!r} has fewer than 2 values")
        sd = float(np.std(block, ddof=1))
        if not sd > 0:
            raise ValueError(f"group {g!r} has zero spread, cannot z-score")
        out[mask] = (block - block.mean()) / sd
    return out


def remove_outliers(tokens: Sequence[TokenRecord], k: float = OUTLIER_SD) -> list[TokenRecord]:
    """Flag tokens beyond k sample SDs of their speaker's mean.

    Screens g1_duration_ms and lag_ms against per-speaker statistics computed
    over the unscreened data (a single pass, no re-screening after removal).
    Returns new records; excluded tokens carry the offending measure names.
    """
    stats: dict[str, dict[str, tuple[float, float]]] = {}
    for speaker in {t.speaker for t in tokens}:
        rows = [t for t in tokens if t.speaker == speaker]
        stats[speaker] = {}
        for measure in ("g1_duration", "lag"):
            vals = np.array([getattr(t, f"{measure}_ms") for t in rows])
            sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            stats[speaker][measure] = (float(vals.mean()), sd)
    out = []
    for t in tokens:
        reasons = []
        for measure in ("g1_duration", "lag"):
            mean, sd = stats[t.speaker][measure]
            if sd > 0 and abs(getattr(t, f"{measure}_ms") - mean) > k * sd:
                reasons.append(measure)
        if reasons:
            out.append(replace(t, excluded=True, exclusion_reason=",".join(reasons)))
        else:
            out.append(replace(t, excluded=False, exclusion_reason=""))
    return out


def ols(x: Sequence[float], y: Sequence[float]) -> RegressionResult:
    """Simple least-squares line y = slope*x + intercept with r-squared."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and the same length")
    if x.size < 3:
        raise ValueError(f"need at least 3 points, got {x.size}")
    xc = x - x.mean()
    ssx = float(xc @ xc)
    # identical values leave ssx at rounding-noise level, not exactly 0
    if ssx <= x.size * (16.0 * np.finfo(float).eps * float(np.abs(x).max(initial=0.0))) ** 2:
        raise ValueError("x has zero variance")
    slope = float(xc @ (y - y.mean())) / ssx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 0.0
    return RegressionResult(slope=slope, intercept=intercept, r2=r2, n=int(x.size))


def perm_test_slope(
    x: Sequence[float],
    y: Sequence[float],
    n_perm: int = 10000,
    seed: int = 0,
    chunk: int = 2000,
) -> float:
    """Two-sided permutation p-value for the OLS slope.

    Shuffles y against x; p = (1 + #{|slope_perm| >= |slope_obs|}) / (n_perm + 1).
    """
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    observed = ols(x, y).slope
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    ssx = float(xc @ xc)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_perm:
        m = min(chunk, n_perm - done)
        perms = rng.permuted(np.tile(y, (m, 1)), axis=1)
        slopes = perms @ xc / ssx
        hits += int(np.count_nonzero(np.abs(slopes) >= abs(observed) - 1e-15))
        done += m
    return (1 + hits) / (n_perm + 1)


def condition_contrast(
    tokens: Sequence[TokenRecord],
    measure: str,
    cond_a: str,
    cond_b: str,
    n_perm: int = 10000,
    seed: int = 0,
    chunk: int = 2000,
) -> tuple[float, float]:
    """Mean difference of a measure between two conditions, with a
    label-permutation p-value stratified within speaker.

    Returns (mean_a - mean_b, two-sided p). Only non-excluded tokens from the
    two conditions enter; condition labels are shuffled within each speaker so
    speaker-level offsets cannot masquerade as condition effects.
    """
    rows = [t for t in tokens if not t.excluded and t.condition in (cond_a, cond_b)]
    vals = np.array([getattr(t, measure) for t in rows])
    is_a = np.array([t.condition == cond_a for t in rows])
    if not is_a.any() or is_a.all():
        raise ValueError(f"need tokens in both {cond_a} and {cond_b}")
    n_a = int(is_a.sum())
    n_b = int(len(rows) - n_a)
    observed = float(vals[is_a].mean() - vals[~is_a].mean())

    speakers = [t.speaker for t in rows]
    blocks = [np.array([s == sp for s in speakers]) for sp in sorted(set(speakers))]
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_perm:
        m = min(chunk, n_perm - done)
        perm_a = np.empty((m, len(rows)), dtype=bool)
        for mask in blocks:
            perm_a[:, mask] = rng.permuted(np.tile(is_a[mask], (m, 1)), axis=1)
        sum_a = perm_a @ vals
        diff = sum_a / n_a - (vals.sum() - sum_a) / n_b
        hits += int(np.count_nonzero(np.abs(diff) >= abs(observed) - 1e-15))
        done += m
    return observed, (1 + hits) / (n_perm + 1)


def classify_coordination(
    tokens: Sequence[TokenRecord],
    n_perm: int = 10000,
    seed: int = 0,
) -> tuple[str, RegressionResult]:
    """Label the G1-duration / lag relation across all speakers.

    Both measures are z-scored within speaker and pooled, then the lag-on-
    duration slope is tested by permutation. A reliably positive, strong
    relation reads as sequential coordination (lag rides on G1 duration); a
    flat, weak one as a stable relative-timing plan. Everything else is
    indeterminate.
    """
    rows = [t for t in tokens if not t.excluded]
    if len(rows) < MIN_CLASSIFY_TOKENS:
        raise ValueError(f"need at least {MIN_CLASSIFY_TOKENS} tokens, got {len(rows)}")
    speakers = [t.speaker for t in rows]
    x = zscore_by_group([t.g1_duration_ms for t in rows], speakers)
    y = zscore_by_group([t.lag_ms for t in rows], speakers)
    fit = ols(x, y)
    p = perm_test_slope(x, y, n_perm=n_perm, seed=seed)
    fit = replace(fit, p_perm=p)
    if fit.slope > 0 and p < SEQ_MAX_P and fit.r2 > SEQ_MIN_R2:
        label = "SEQUENCE"
    elif p >= COMPLEX_MIN_P and fit.r2 < COMPLEX_MAX_R2:
        label = "COMPLEX"
    else:
        label = "INDETERMINATE"
    return label, fit


def _fmt(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.3f}"


def write_token_csv(tokens: Iterable[TokenRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TOKEN_FIELDS)
        for t in tokens:
            writer.writerow(
                [
                    t.speaker,
                    t.condition,
                    t.item,
                    t.rep,
                    _fmt(t.g1_onset_ms),
                    _fmt(t.g1_offset_ms),
                    _fmt(t.g2_onset_ms),
                    _fmt(t.g1_duration_ms),
                    _fmt(t.lag_ms),
                    _fmt(t.tb_pos_mm),
                    _fmt(t.tb_pos_z),
                    int(t.excluded),
                    t.exclusion_reason,
                ]
            )


def read_token_csv(path: str | Path) -> list[TokenRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TOKEN_FIELDS:
            raise ValueError(f"unexpected token table header in {path}: {header}")
        out = []
        for row in reader:
            if len(row) != len(TOKEN_FIELDS):
                raise ValueError(f"malformed token row in {path}: {row}")
            out.append(
                TokenRecord(
                    speaker=row[0],
                    condition=row[1],
                    item=row[2],
                    rep=int(row[3]),
                    g1_onset_ms=float(row[4]),
                    g1_offset_ms=float(row[5]),
                    g2_onset_ms=float(row[6]),
                    g1_duration_ms=float(row[7]),
                    lag_ms=float(row[8]),
                    tb_pos_mm=float(row[9]),
                    tb_pos_z=float(row[10]),
                    excluded=bool(int(row[11])),
                    exclusion_reason=row[12],
                )
            )
    if not out:
        raise ValueError(f"token table {path} has no rows")
    return out


def write_summary_csv(rows: Iterable[dict], path: str | Path) -> None:
    """Write per-cell summary rows; values may be None/nan for degenerate cells."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for row in rows:
            rec = []
            for field in SUMMARY_FIELDS:
                value = row[field]
                if field in ("speaker", "condition"):
                    rec.append(value)
                elif field == "n":
                    rec.append(int(value))
                else:
                    rec.append(_fmt(math.nan if value is None else float(value)))
            writer.writerow(rec)
