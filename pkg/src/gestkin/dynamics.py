"""Task dynamics: critically/over-damped second-order tract-variable control
with weighted parameter blending of co-active gestures.

Each tract variable x follows

    x'' = k_eff * (x0_eff - x) - 2 * zeta_eff * sqrt(k_eff) * x'

where the effective parameters are blending-strength-weighted means over the
gestures active at that instant (damping is the max), and a slow neutral
attractor takes over when nothing is active. Scores are integrated with a
fixed-step 4th-order Runge-Kutta scheme and the result is resampled onto the
score's sample grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .score import Gesture, GesturalScore, validate_score

DEFAULT_RELAX_STIFFNESS_S2 = 100.0


@dataclass(frozen=True)
class BlendedParams:
    """Effective regime for one tract variable at one instant."""

    target_mm: float
    stiffness_s2: float
    damping_ratio: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions of one tract variable sampled at a uniform rate."""

    channel: str
    sample_rate_hz: float
    samples: np.ndarray
    t0_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    @property
    def times_ms(self) -> np.ndarray:
        n = len(self.samples)
        return self.t0_ms + np.arange(n) * (1000.0 / self.sample_rate_hz)

    @property
    def t_end_ms(self) -> float:
        return self.t0_ms + (len(self.samples) - 1) * (1000.0 / self.sample_rate_hz)


def blend_parameters(active: Sequence[Gesture], neutral_mm: float = 0.0) -> BlendedParams:
    """Blend the co-active gestures of one tract variable.

    Target and stiffness are blending-strength-weighted means; the damping
    ratio is the max over the active set. Raises ValueError on an empty set or
    if the gestures belong to different tract variables. neutral_mm is unused
    while anything is active but kept in the signature for symmetry with the
    inactive regime.
    """
    if not active:
        raise ValueError("blend_parameters needs at least one active gesture")
    tvs = {g.tract_variable for g in active}
    if len(tvs) > 1:
        raise ValueError(f"cannot blend gestures from different tract variables: {sorted(tvs)}")
    wsum = sum(g.blending_strength for g in active)
    target = sum(g.blending_strength * g.target_mm for g in active) / wsum
    stiffness = sum(g.blending_strength * g.stiffness_s2 for g in active) / wsum
    damping = max(g.damping_ratio for g in active)
    return BlendedParams(target_mm=target, stiffness_s2=stiffness, damping_ratio=damping)


def analytic_step_response(delta: float, omega_n: float, t_ms):
    """Closed-form critically damped step response.

    A unit mass at rest at the origin is driven toward a target delta away
    with stiffness omega_n**2 and critical damping. Returns (position offset,
    velocity) at t_ms, where position offset is relative to the start and
    velocity is in mm/s; both vectorize over t_ms. Negative times are an error.
    """
    t = np.asarray(t_ms, dtype=float)
    if np.any(t < 0):
        raise ValueError("analytic_step_response: t_ms must be >= 0")
    u = omega_n * t / 1000.0
    decay = np.exp(-u)
    pos = delta * (1.0 - (1.0 + u) * decay)
    vel = delta * omega_n * u * decay
    if np.isscalar(t_ms):
        return float(pos), float(vel)
    return pos, vel


def _blended_params(
    score: GesturalScore, t_ms: np.ndarray, relax_stiffness_s2: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Piecewise-constant blended parameters sampled at the given times.

    Returns (x0, k, c) arrays of shape (len(t_ms), n_channels) where c is
    the damping coefficient 2*zeta*sqrt(k).
    """
    channels = score.channels()
    nt, nc = len(t_ms), len(channels)
    wsum = np.zeros((nt, nc))
    wx = np.zeros((nt, nc))
    wk = np.zeros((nt, nc))
    zmax = np.zeros((nt, nc))
    for j, ch in enumerate(channels):
        for g in score.gestures_on(ch):
            m = (t_ms >= g.t_on_ms) & (t_ms < g.t_off_ms)
            w = g.blending_strength
            wsum[m, j] += w
            wx[m, j] += w * g.target_mm
            wk[m, j] += w * g.stiffness_s2
            zmax[m, j] = np.maximum(zmax[m, j], g.damping_ratio)
    neutral = np.array([score.neutral(ch) for ch in channels])
    active = wsum > 0
    x0 = np.where(active, np.divide(wx, wsum, out=np.zeros_like(wx), where=active), neutral)
    k = np.where(active, np.divide(wk, wsum, out=np.zeros_like(wk), where=active), relax_stiffness_s2)
    zeta = np.where(active, zmax, 1.0)
    c = 2.0 * zeta * np.sqrt(k)
    return x0, k, c


def integrate_many(
    scores: Sequence[GesturalScore],
    dt_ms: float = 0.5,
    relax_stiffness_s2: float = DEFAULT_RELAX_STIFFNESS_S2,
) -> list[dict[str, Trajectory]]:
    """Integrate several scores that share duration, rate and channel layout.

    The scores are stacked and stepped together, which is much faster than
    integrating token by token; the arithmetic is elementwise, so results are
    bit-identical to integrating each score alone.
    """
    if not scores:
        return []
    first = scores[0]
    channels = first.channels()
    for s in scores:
        problems = validate_score(s)
        if problems:
            raise ValueError("invalid score: " + "; ".join(problems))
        if (
            s.duration_ms != first.duration_ms
            or s.sample_rate_hz != first.sample_rate_hz
            or s.channels() != channels
        ):
            raise ValueError("integrate_many: scores must share duration, rate and channels")
    if not 0 < dt_ms <= min(1.0, 1000.0 / first.sample_rate_hz):
        raise ValueError(
            f"dt_ms={dt_ms} outside (0, {min(1.0, 1000.0 / first.sample_rate_hz)}]"
        )

    n_out = int(round(first.duration_ms / 1000.0 * first.sample_rate_hz)) + 1
    sample_t = np.arange(n_out) * (1000.0 / first.sample_rate_hz)
    t_end = max(first.duration_ms, float(sample_t[-1]))
    n_steps = int(math.ceil(t_end / dt_ms - 1e-9))
    # parameters are piecewise constant, so every RK4 stage of a step uses the
    # regime at the step midpoint; switches aligned to the grid stay exact
    t_mid = (np.arange(n_steps) + 0.5) * dt_ms

    # params stacked as (n_steps, n_scores, n_channels)
    x0 = np.empty((len(t_mid), len(scores), len(channels)))
    k = np.empty_like(x0)
    c = np.empty_like(x0)
    for i, s in enumerate(scores):
        x0[:, i, :], k[:, i, :], c[:, i, :] = _blended_params(s, t_mid, relax_stiffness_s2)

    h = dt_ms / 1000.0
    x = np.tile(np.array([first.neutral(ch) for ch in channels]), (len(scores), 1))
    v = np.zeros_like(x)
    fine = np.empty((n_steps + 1, len(scores), len(channels)))
    fine[0] = x
    for step in range(n_steps):
        km, xm, cm = k[step], x0[step], c[step]
        a1 = km * (xm - x) - cm * v
        x2 = x + 0.5 * h * v
        v2 = v + 0.5 * h * a1
        a2 = km * (xm - x2) - cm * v2
        x3 = x + 0.5 * h * v2
        v3 = v + 0.5 * h * a2
        a3 = km * (xm - x3) - cm * v3
        x4 = x + h * v3
        v4 = v + h * a3
        a4 = km * (xm - x4) - cm * v4
        x = x + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        fine[step + 1] = x
    if not np.all(np.isfinite(fine)):
        raise ValueError("integration diverged (non-finite state)")

    # resample the fine grid onto the score's sample grid
    ratio = (1000.0 / first.sample_rate_hz) / dt_ms
    out = np.empty((n_out, len(scores), len(channels)))
    if abs(ratio - round(ratio)) < 1e-9:
        idx = (np.arange(n_out) * int(round(ratio))).astype(int)
        out[:] = fine[idx]
    else:
        pos = sample_t / dt_ms
        i0 = np.clip(np.floor(pos).astype(int), 0, n_steps - 1)
        frac = (pos - i0)[:, None, None]
        out[:] = fine[i0] * (1.0 - frac) + fine[i0 + 1] * frac

    results = []
    for i, s in enumerate(scores):
        results.append(
            {
                ch: Trajectory(channel=ch, sample_rate_hz=s.sample_rate_hz, samples=out[:, i, j])
                for j, ch in enumerate(channels)
            }
        )
    return results


def integrate(
    score: GesturalScore,
    dt_ms: float = 0.5,
    relax_stiffness_s2: float = DEFAULT_RELAX_STIFFNESS_S2,
) -> dict[str, Trajectory]:
    """Integrate one score; see integrate_many for the numerics."""
    return integrate_many([score], dt_ms=dt_ms, relax_stiffness_s2=relax_stiffness_s2)[0]


def write_trajectory_csv(trajectories: Mapping[str, Trajectory], path: str | Path) -> None:
    """Write trajectories sharing one time base as a fixed-point CSV."""
    if not trajectories:
        raise ValueError("no trajectories to write")
    channels = [ch for ch in ("LA", "TB_CL", "TB_CD") if ch in trajectories]
    channels += [ch for ch in trajectories if ch not in channels]
    ref = trajectories[channels[0]]
    times = ref.times_ms
    for ch in channels[1:]:
        tr = trajectories[ch]
        if len(tr.samples) != len(times) or tr.t0_ms != ref.t0_ms or tr.sample_rate_hz != ref.sample_rate_hz:
            raise ValueError("trajectories in one file must share their time base")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms"] + channels)
        for i, t in enumerate(times):
            writer.writerow(
                [f"{t:.6f}"] + [f"{trajectories[ch].samples[i]:.6f}" for ch in channels]
            )


def read_trajectory_csv(path: str | Path) -> dict[str, Trajectory]:
    """Read a trajectory CSV back into per-channel Trajectory objects.

    The time column must be uniformly spaced; the sample rate is recovered
    from it. Raises ValueError on malformed data.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"empty trajectory file: {path}") from None
        if not header or header[0] != "t_ms" or len(header) < 2:
            raise ValueError(f"bad trajectory header in {path}: {header}")
        rows = list(reader)
    if len(rows) < 2:
        raise ValueError(f"trajectory file needs at least 2 samples: {path}")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"non-numeric value in {path}: {exc}") from exc
    times = data[:, 0]
    steps = np.diff(times)
    if steps.min() <= 0 or steps.max() - steps.min() > 1e-6:
        raise ValueError(f"time column in {path} is not uniformly increasing")
    rate = 1000.0 / float(np.mean(steps))
    return {
        ch: Trajectory(channel=ch, sample_rate_hz=rate, samples=data[:, j + 1], t0_ms=float(times[0]))
        for j, ch in enumerate(header[1:])
    }
