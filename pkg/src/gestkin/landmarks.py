"""Kinematic landmark parsing: gestural onset/target/release/offset from
velocity thresholds, in the style of EMA articulatory labeling.

A movement toward constriction is located as the largest velocity extremum in
the constriction direction inside the analysis window, the return movement as
the subsequent extremum in the opposite direction. Onset and Target sit where
|velocity| crosses a fraction (default 20%) of the toward-peak, Release and
Offset where it crosses the same fraction of the away-peak, with crossing
times refined by linear interpolation between samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .smoothing import velocity

VELOCITY_FLOOR_MMS = 5.0


class ParseError(ValueError):
    """A movement could not be parsed from the window."""


class NoMovement(ParseError):
    """No toward-constriction movement above the velocity floor."""


class NoReturnMovement(ParseError):
    """No opposite-direction movement following the toward-peak."""


@dataclass(frozen=True)
class GestureLandmarks:
    channel: str
    direction: str
    onset_ms: float
    target_ms: float
    release_ms: float
    offset_ms: float
    peak_vel_to_mms: float
    peak_vel_to_ms: float
    peak_vel_away_mms: float
    peak_vel_away_ms: float
    threshold: float

    def ordered(self) -> bool:
        return self.onset_ms < self.target_ms <= self.release_ms < self.offset_ms


def _cross_up_before(c, t, thr, lo, hi):
    """Last upward crossing of c through thr in [lo, hi), interpolated."""
    below = c[lo:hi] < thr
    above = c[lo + 1 : hi + 1] >= thr
    hits = np.nonzero(below & above)[0]
    if len(hits) == 0:
        return None
    i = lo + int(hits[-1])
    frac = (thr - c[i]) / (c[i + 1] - c[i])
    return float(t[i] + frac * (t[i + 1] - t[i]))


def _cross_down_after(c, t, thr, lo, hi):
    """First downward crossing of c through thr in [lo, hi), interpolated."""
    above = c[lo:hi] >= thr
    below = c[lo + 1 : hi + 1] < thr
    hits = np.nonzero(above & below)[0]
    if len(hits) == 0:
        return None
    i = lo + int(hits[0])
    frac = (c[i] - thr) / (c[i] - c[i + 1])
    return float(t[i] + frac * (t[i + 1] - t[i]))


def find_gesture(
    trajectory: Trajectory,
    window_ms: tuple[float, float],
    direction: str,
    threshold: float = 0.2,
) -> GestureLandmarks:
    """Parse one toward-and-back movement inside window_ms.

    direction is "increasing" or "decreasing": the sign of velocity that counts
    as moving toward constriction. Raises NoMovement if the toward-peak stays
    under the 5 mm/s floor (the floor applies to the return peak as well),
    NoReturnMovement if nothing moves back, and ParseError if a threshold
    crossing is missing or the landmarks come out unordered.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError(f"direction must be 'increasing' or 'decreasing', got {direction!r}")
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    a, b = window_ms
    t = trajectory.times_ms
    if a >= b:
        raise ValueError(f"empty window {window_ms}")
    if a < trajectory.t0_ms - 1e-9 or b > trajectory.t_end_ms + 1e-9:
        raise ValueError(
            f"window {window_ms} outside trajectory [{trajectory.t0_ms}, {trajectory.t_end_ms}]"
        )

    v = velocity(trajectory)
    w = v if direction == "increasing" else -v
    c = np.abs(v)

    inside = np.nonzero((t >= a - 1e-9) & (t <= b + 1e-9))[0]
    if len(inside) < 3:
        raise ValueError(f"window {window_ms} holds fewer than 3 samples")
    lo, hi = int(inside[0]), int(inside[-1])

    peak_idx = lo + int(np.argmax(w[lo : hi + 1]))
    peak_to = float(w[peak_idx])
    if peak_to < VELOCITY_FLOOR_MMS:
        raise NoMovement(
            f"toward-peak {peak_to:.2f} mm/s under the {VELOCITY_FLOOR_MMS} mm/s floor"
        )
    if peak_idx == hi:
        raise NoReturnMovement("toward-peak sits at the window edge")
    away_idx = peak_idx + 1 + int(np.argmin(w[peak_idx + 1 : hi + 1]))
    peak_away = float(w[away_idx])
    if peak_away >= 0 or -peak_away < VELOCITY_FLOOR_MMS:
        raise NoReturnMovement(
            f"no opposite-direction movement above the floor after the toward-peak"
            f" (min {peak_away:.2f} mm/s)"
        )

    thr_to = threshold * abs(peak_to)
    thr_away = threshold * abs(peak_away)
    onset = _cross_up_before(c, t, thr_to, lo, peak_idx)
    target = _cross_down_after(c, t, thr_to, peak_idx, away_idx)
    release = _cross_up_before(c, t, thr_away, peak_idx, away_idx)
    offset = _cross_down_after(c, t, thr_away, away_idx, hi)
    missing = [
        name
        for name, val in (("onset", onset), ("target", target), ("release", release), ("offset", offset))
        if val is None
    ]
    if missing:
        raise ParseError(f"no {'/'.join(missing)} threshold crossing inside the window")

    sign = 1.0 if direction == "increasing" else -1.0
    lm = GestureLandmarks(
        channel=trajectory.channel,
        direction=direction,
        onset_ms=onset,
        target_ms=target,
        release_ms=release,
        offset_ms=offset,
        peak_vel_to_mms=sign * peak_to,
        peak_vel_to_ms=float(t[peak_idx]),
        peak_vel_away_mms=sign * peak_away,
        peak_vel_away_ms=float(t[away_idx]),
        threshold=threshold,
    )
    if not lm.ordered():
        raise ParseError(
            f"landmarks unordered: onset={onset:.2f} target={target:.2f}"
            f" release={release:.2f} offset={offset:.2f}"
        )
    return lm


def compute_la(upper_xy, lower_xy, sample_rate_hz: float, t0_ms: float = 0.0) -> Trajectory:
    """Lip aperture from two 2-D fleshpoint traces: pointwise Euclidean distance."""
    upper = np.asarray(upper_xy, dtype=float)
    lower = np.asarray(lower_xy, dtype=float)
    if upper.shape != lower.shape or upper.ndim != 2 or upper.shape[1] != 2:
        raise ValueError(
            f"expected matching (n, 2) traces, got {upper.shape} and {lower.shape}"
        )
    gap = np.linalg.norm(upper - lower, axis=1)
    return Trajectory(channel="LA", sample_rate_hz=sample_rate_hz, samples=gap, t0_ms=t0_ms)
