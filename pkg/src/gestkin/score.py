"""Gestural scores: tract variables, gestures with activation windows, and
the scenario presets used throughout the synthetic timing experiments."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

TRACT_VARIABLES = ("LA", "TB_CL", "TB_CD")

UNDERLYING = "UNDERLYING"
ASSIMILATORY = "ASSIMILATORY"
SEQUENCE = "SEQUENCE"
CONDITIONS = (UNDERLYING, ASSIMILATORY, SEQUENCE)

# Gestures must be active at least this long for the dynamics to do anything useful.
MIN_ACTIVATION_MS = 10.0

# Dimensionless time u = omega_n * t at which the critically damped step-response
# velocity has fallen back to 20% of its peak (larger root of u*exp(-u) = 0.2/e).
# Activation windows are sized so the approach movement is complete, in the sense
# of the 20%-threshold landmark labeling, before the hold phase ends.
MOVEMENT_COMPLETE_U = 3.994308347002122


@dataclass(frozen=True)
class TractVariable:
    """A controlled vocal-tract dimension with its rest position in mm."""

    name: str
    neutral_mm: float


@dataclass(frozen=True)
class Gesture:
    """One constriction task: a target-directed second-order regime on a tract
    variable, active over [t_on_ms, t_off_ms)."""

    id: str
    tract_variable: str
    target_mm: float
    stiffness_s2: float
    damping_ratio: float
    blending_strength: float
    t_on_ms: float
    t_off_ms: float
    descriptor: str = ""

    def active_at(self, t_ms: float) -> bool:
        return self.t_on_ms <= t_ms < self.t_off_ms

    @property
    def omega_n(self) -> float:
        """Natural frequency in 1/s."""
        return math.sqrt(self.stiffness_s2)


@dataclass(frozen=True)
class GesturalScore:
    duration_ms: float
    sample_rate_hz: float
    tract_variables: tuple[TractVariable, ...]
    gestures: tuple[Gesture, ...]

    def channels(self) -> tuple[str, ...]:
        """Tract-variable names in canonical order."""
        declared = [tv.name for tv in self.tract_variables]
        return tuple(n for n in TRACT_VARIABLES if n in declared) + tuple(
            n for n in declared if n not in TRACT_VARIABLES
        )

    def neutral(self, channel: str) -> float:
        for tv in self.tract_variables:
            if tv.name == channel:
                return tv.neutral_mm
        raise KeyError(f"no tract variable named {channel!r} in score")

    def gestures_on(self, channel: str) -> tuple[Gesture, ...]:
        return tuple(g for g in self.gestures if g.tract_variable == channel)


def validate_score(score: GesturalScore) -> list[str]:
    """Check every score invariant and return one message per violation.

    An empty list means the score is well formed: positive duration, sample rate
    of at least 100 Hz, known and unique tract variables, unique gesture ids,
    gestures referencing declared tract variables, finite targets, positive
    stiffness and blending strength, damping ratio >= 1 (no underdamped
    gestures), and activation windows of at least MIN_ACTIVATION_MS lying
    inside [0, duration].
    """
    problems: list[str] = []
    if not (score.duration_ms > 0 and math.isfinite(score.duration_ms)):
        problems.append(f"score: duration_ms must be positive, got {score.duration_ms}")
    if not (score.sample_rate_hz >= 100 and math.isfinite(score.sample_rate_hz)):
        problems.append(
            f"score: sample_rate_hz must be at least 100 Hz, got {score.sample_rate_hz}"
        )

    seen_tv: set[str] = set()
    for tv in score.tract_variables:
        if tv.name not in TRACT_VARIABLES:
            problems.append(f"tract variable {tv.name!r}: unknown name")
        if tv.name in seen_tv:
            problems.append(f"tract variable {tv.name!r}: duplicate declaration")
        seen_tv.add(tv.name)
        if not math.isfinite(tv.neutral_mm):
            problems.append(f"tract variable {tv.name!r}: neutral_mm must be finite")

    seen_g: set[str] = set()
    for g in score.gestures:
        gid = g.id
        if gid in seen_g:
            problems.append(f"gesture {gid!r}: duplicate id")
        seen_g.add(gid)
        if g.tract_variable not in seen_tv:
            problems.append(
                f"gesture {gid!r}: tract variable {g.tract_variable!r} not declared in score"
            )
        if not math.isfinite(g.target_mm):
            problems.append(f"gesture {gid!r}: target_mm must be finite")
        if not (g.stiffness_s2 > 0 and math.isfinite(g.stiffness_s2)):
            problems.append(f"gesture {gid!r}: stiffness_s2 must be > 0")
        if not (g.damping_ratio >= 1 and math.isfinite(g.damping_ratio)):
            problems.append(f"gesture {gid!r}: damping_ratio must be >= 1")
        if not (g.blending_strength > 0 and math.isfinite(g.blending_strength)):
            problems.append(f"gesture {gid!r}: blending_strength must be > 0")
        if not g.t_on_ms < g.t_off_ms:
            problems.append(f"gesture {gid!r}: t_on_ms must be < t_off_ms")
        elif g.t_off_ms - g.t_on_ms < MIN_ACTIVATION_MS:
            problems.append(
                f"gesture {gid!r}: activation shorter than {MIN_ACTIVATION_MS} ms"
            )
        if g.t_on_ms < 0 or g.t_off_ms > score.duration_ms:
            problems.append(f"gesture {gid!r}: activation outside [0, duration]")
    return problems


def active_gestures(score: GesturalScore, t_ms: float) -> dict[str, list[Gesture]]:
    """Map each tract variable to the gestures active at time t_ms.

    Channels with no active gesture are omitted. Activation intervals are
    half-open, so a gesture is active at its onset and inactive at its offset.
    """
    if not 0 <= t_ms <= score.duration_ms:
        raise ValueError(f"t={t_ms} ms outside score interval [0, {score.duration_ms}]")
    out: dict[str, list[Gesture]] = {}
    for ch in score.channels():
        hits = [g for g in score.gestures_on(ch) if g.active_at(t_ms)]
        hits.sort(key=lambda g: (g.t_on_ms, g.id))
        if hits:
            out[ch] = hits
    return out


@dataclass(frozen=True)
class PresetParams:
    """Concrete parameter set for one token of a scenario preset.

    The defaults describe the canonical speaker. The harness overrides fields
    for speaker-level variation (stiffness scale, target offsets) and per-token
    noise (onset/duration/target deltas); zero deltas reproduce the canonical
    token exactly.
    """

    t0_ms: float = 200.0
    duration_ms: float = 1000.0
    sample_rate_hz: float = 200.0

    la_neutral_mm: float = 15.0
    tb_neutral_mm: float = 0.0
    la_target_mm: float = 0.0
    palatal_target_mm: float = 12.0
    # Residual velarization of the plain labial: small, fast posture gesture.
    # Values calibrated against the lag-contrast and retraction targets, see
    # scripts/calibrate_defaults.py.
    velar_target_mm: float = -2.8
    stiffness_s2: float = 1600.0
    velar_stiffness_s2: float = 12100.0
    damping_ratio: float = 1.0
    labial_weight: float = 1.0
    palatal_weight: float = 1.0
    velar_weight: float = 1.0
    hold_ms: float = 50.0
    eccentric_delay_ms: float = 25.0
    sequence_gap_ms: float = 0.0

    include_vowel: bool = False
    vowel_target_mm: float = -5.0
    vowel_weight: float = 0.5

    labial_onset_delta_ms: float = 0.0
    palatal_onset_delta_ms: float = 0.0
    velar_onset_delta_ms: float = 0.0
    labial_duration_scale: float = 1.0
    palatal_duration_scale: float = 1.0
    labial_target_delta_mm: float = 0.0
    palatal_target_delta_mm: float = 0.0
    velar_target_delta_mm: float = 0.0

    def activation_ms(self, stiffness_s2: float) -> float:
        """Nominal activation length: approach movement completion plus hold."""
        return MOVEMENT_COMPLETE_U / math.sqrt(stiffness_s2) * 1000.0 + self.hold_ms


def preset_scenario(condition: str, params: PresetParams | None = None) -> GesturalScore:
    """Build the two-consonant score for one of the three timing conditions.

    All three share a labial closure gesture (LA) and a palatal fronting
    gesture (TB_CL). They differ only in how the palatal is coordinated:

    UNDERLYING    palatal onset shares the labial's plan origin (in-phase).
    ASSIMILATORY  the same, plus a small back-target velar gesture starting
                  with the labial and staying active until the palatal ends;
                  the palatal onset is shifted by the eccentric delay.
    SEQUENCE      palatal onset chained to the realized labial offset plus
                  sequence_gap_ms (offset coupling, the CC control).

    Raises ValueError for unknown condition names or if the resulting score
    fails validation.
    """
    p = params or PresetParams()
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}, expected one of {CONDITIONS}")

    lab_on = p.t0_ms + p.labial_onset_delta_ms
    lab_off = lab_on + p.activation_ms(p.stiffness_s2) * p.labial_duration_scale
    labial = Gesture(
        id="lab",
        tract_variable="LA",
        target_mm=p.la_target_mm + p.labial_target_delta_mm,
        stiffness_s2=p.stiffness_s2,
        damping_ratio=p.damping_ratio,
        blending_strength=p.labial_weight,
        t_on_ms=lab_on,
        t_off_ms=lab_off,
        descriptor="clo labial",
    )

    if condition == SEQUENCE:
        pal_on = lab_off + p.sequence_gap_ms + p.palatal_onset_delta_ms
    elif condition == ASSIMILATORY:
        pal_on = p.t0_ms + p.eccentric_delay_ms + p.palatal_onset_delta_ms
    else:
        pal_on = p.t0_ms + p.palatal_onset_delta_ms
    pal_off = pal_on + p.activation_ms(p.stiffness_s2) * p.palatal_duration_scale
    palatal = Gesture(
        id="pal",
        tract_variable="TB_CL",
        target_mm=p.palatal_target_mm + p.palatal_target_delta_mm,
        stiffness_s2=p.stiffness_s2,
        damping_ratio=p.damping_ratio,
        blending_strength=p.palatal_weight,
        t_on_ms=pal_on,
        t_off_ms=pal_off,
        descriptor="narrow palatal",
    )

    gestures = [labial, palatal]
    if condition == ASSIMILATORY:
        # The velar end is tied to the realized palatal end so the tongue body
        # makes a single release movement.
        gestures.append(
            Gesture(
                id="vel",
                tract_variable="TB_CL",
                target_mm=p.velar_target_mm + p.velar_target_delta_mm,
                stiffness_s2=p.velar_stiffness_s2,
                damping_ratio=p.damping_ratio,
                blending_strength=p.velar_weight,
                t_on_ms=p.t0_ms + p.velar_onset_delta_ms,
                t_off_ms=pal_off,
                descriptor="crit velar",
            )
        )
    if p.include_vowel:
        gestures.append(
            Gesture(
                id="vow",
                tract_variable="TB_CL",
                target_mm=p.vowel_target_mm,
                stiffness_s2=p.stiffness_s2,
                damping_ratio=p.damping_ratio,
                blending_strength=p.vowel_weight,
                t_on_ms=pal_off,
                t_off_ms=p.duration_ms - 50.0,
                descriptor="wide pharyngeal",
            )
        )

    score = GesturalScore(
        duration_ms=p.duration_ms,
        sample_rate_hz=p.sample_rate_hz,
        tract_variables=(
            TractVariable("LA", p.la_neutral_mm),
            TractVariable("TB_CL", p.tb_neutral_mm),
        ),
        gestures=tuple(gestures),
    )
    problems = validate_score(score)
    if problems:
        raise ValueError(
            f"{condition} preset produced an invalid score: " + "; ".join(problems)
        )
    return score


def score_to_dict(score: GesturalScore) -> dict:
    return {
        "duration_ms": score.duration_ms,
        "sample_rate_hz": score.sample_rate_hz,
        "tract_variables": [
            {"name": tv.name, "neutral_mm": tv.neutral_mm} for tv in score.tract_variables
        ],
        "gestures": [
            {
                "id": g.id,
                "tract_variable": g.tract_variable,
                "target_mm": g.target_mm,
                "stiffness_s2": g.stiffness_s2,
                "damping_ratio": g.damping_ratio,
                "blending_strength": g.blending_strength,
                "t_on_ms": g.t_on_ms,
                "t_off_ms": g.t_off_ms,
                "descriptor": g.descriptor,
            }
            for g in score.gestures
        ],
    }


def score_from_dict(data: dict) -> GesturalScore:
    try:
        score = GesturalScore(
            duration_ms=float(data["duration_ms"]),
            sample_rate_hz=float(data["sample_rate_hz"]),
            tract_variables=tuple(
                TractVariable(str(tv["name"]), float(tv["neutral_mm"]))
                for tv in data["tract_variables"]
            ),
            gestures=tuple(
                Gesture(
                    id=str(g["id"]),
                    tract_variable=str(g["tract_variable"]),
                    target_mm=float(g["target_mm"]),
                    stiffness_s2=float(g["stiffness_s2"]),
                    damping_ratio=float(g["damping_ratio"]),
                    blending_strength=float(g["blending_strength"]),
                    t_on_ms=float(g["t_on_ms"]),
                    t_off_ms=float(g["t_off_ms"]),
                    descriptor=str(g.get("descriptor", "")),
                )
                for g in data["gestures"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed score data: {exc}") from exc
    problems = validate_score(score)
    if problems:
        raise ValueError("invalid score: " + "; ".join(problems))
    return score


def save_score(score: GesturalScore, path: str | Path) -> None:
    Path(path).write_text(json.dumps(score_to_dict(score), indent=2) + "\n", encoding="utf-8")


def load_score(path: str | Path) -> GesturalScore:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"could not parse score file {path}: {exc}") from exc
    return score_from_dict(data)


def shifted(gesture: Gesture, delta_ms: float) -> Gesture:
    """Copy of a gesture with its activation window moved by delta_ms."""
    return replace(
        gesture, t_on_ms=gesture.t_on_ms + delta_ms, t_off_ms=gesture.t_off_ms + delta_ms
    )
