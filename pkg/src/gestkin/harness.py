"""Scenario runner: simulated speaker populations, noisy token synthesis, the
smoothing/parsing/measurement pipeline, and the three-part timing experiment.

A scenario draws per-speaker parameter offsets, builds one preset score per
token with production noise applied to the plan, integrates the dynamics in
batches, adds measurement noise, robust-smooths, parses landmarks, and hands
the measured token table to the statistics layer. Every random draw is keyed
by (seed, stream, speaker, condition, token), so runs are reproducible
regardless of batching, and all analysis consumes values at token-CSV
precision: re-reading an emitted table reproduces the report exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import landmarks, smoothing, stats
from .dynamics import Trajectory, integrate_many, write_trajectory_csv
from .planner import (
    DEFAULT_OMEGA0_RAD_S,
    CouplingEdge,
    CouplingGraph,
    phases_to_onsets,
    solve_phases_ls,
    wrap_phase,
)
from .score import (
    ASSIMILATORY,
    CONDITIONS,
    SEQUENCE,
    UNDERLYING,
    GesturalScore,
    PresetParams,
    preset_scenario,
)

SIM_DT_MS = 1.0
SIM_BATCH = 512
PARSE_WINDOW_PAD_MS = 150.0
MAX_PARSE_FAILURE_FRACTION = 0.20
PARSE_FAILURE = "parse_failure"
N_PERM_DEFAULT = 10000

# published removal rates the outlier log is compared against
REFERENCE_EXCLUSION_FRACTION = {"g1_duration": 0.006, "lag": 0.016}

# qualitative plausibility ranges for the onset-coupled conditions
SANITY_G1_RANGE_MS = (80.0, 400.0)
SANITY_LAG_RANGE_MS = (-20.0, 150.0)

BLEND_SWEEP_WEIGHTS = (0.25, 0.5, 1.0, 2.0, 4.0)
# shallow enough that the heaviest blend still clears the parser's velocity floor
BLEND_SWEEP_VELAR_TARGET_MM = -2.0

# spawn-key stream tags; the key layout is part of the reproducibility contract
_SPEAKER_STREAM = 1
_TOKEN_STREAM = 2
_STAT_STREAM = 3


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=key))
    )


def _stat_seed(seed: int, idx: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STAT_STREAM, idx))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class NoiseModel:
    """Production and measurement noise for synthetic tokens.

    position_sd_mm      additive white noise on sampled positions
    duration_jitter_sd  lognormal sd (log units) scaling activation durations
    timing_jitter_sd_ms additive Gaussian jitter on activation onsets
    target_jitter_sd_mm additive Gaussian jitter on gesture targets

    All-zero sds make every token of a cell bit-identical.
    """

    position_sd_mm: float = 0.15
    duration_jitter_sd: float = 0.10
    timing_jitter_sd_ms: float = 3.0
    target_jitter_sd_mm: float = 0.8

    def is_silent(self) -> bool:
        return (
            self.position_sd_mm == 0
            and self.duration_jitter_sd == 0
            and self.timing_jitter_sd_ms == 0
            and self.target_jitter_sd_mm == 0
        )


def add_position_noise(
    trajectory: Trajectory, rng: np.random.Generator, sd_mm: float
) -> Trajectory:
    """Additive white position noise; sd 0 returns the trajectory untouched."""
    if sd_mm == 0:
        return trajectory
    if sd_mm < 0:
        raise ValueError("position noise sd must be >= 0")
    noisy = trajectory.samples + rng.normal(0.0, sd_mm, size=len(trajectory.samples))
    return Trajectory(
        channel=trajectory.channel,
        sample_rate_hz=trajectory.sample_rate_hz,
        samples=noisy,
        t0_ms=trajectory.t0_ms,
    )


@dataclass(frozen=True)
class SpeakerVariation:
    """Spread of per-speaker offsets around the canonical parameter set."""

    stiffness_rel_sd: float = 0.15
    target_sd_mm: float = 1.0
    velar_rel_sd: float = 0.15


@dataclass(frozen=True)
class ScenarioConfig:
    n_speakers: int = 4
    tokens_per_condition: int = 144
    conditions: tuple[str, ...] = CONDITIONS
    eccentric_delay_ms: float = 25.0
    velar_blending_strength: float = 1.0
    speaker_variation: SpeakerVariation = field(default_factory=SpeakerVariation)
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    sample_rate_hz: float = 200.0
    use_coupling_planner: bool = False
    relax_stiffness_s2: float = 1600.0
    items: tuple[str, ...] = ("i1", "i2", "i3", "i4")


def validate_config(config: ScenarioConfig) -> list[str]:
    problems: list[str] = []
    if config.n_speakers < 1:
        problems.append("n_speakers must be >= 1")
    if config.tokens_per_condition < 20:
        problems.append("tokens_per_condition must be >= 20 (classification needs 20 tokens)")
    if not config.conditions:
        problems.append("conditions must be nonempty")
    if len(set(config.conditions)) != len(config.conditions):
        problems.append("conditions contains duplicates")
    for c in config.conditions:
        if c not in CONDITIONS:
            problems.append(f"unknown condition {c!r}")
    if not config.eccentric_delay_ms >= 0:
        problems.append("eccentric_delay_ms must be >= 0")
    if not config.velar_blending_strength > 0:
        problems.append("velar_blending_strength must be > 0")
    if not config.sample_rate_hz >= 100:
        problems.append("sample_rate_hz must be >= 100")
    if not config.relax_stiffness_s2 > 0:
        problems.append("relax_stiffness_s2 must be > 0")
    if not config.items:
        problems.append("items must be nonempty")
    for name, value in (
        ("noise.position_sd_mm", config.noise.position_sd_mm),
        ("noise.duration_jitter_sd", config.noise.duration_jitter_sd),
        ("noise.timing_jitter_sd_ms", config.noise.timing_jitter_sd_ms),
        ("noise.target_jitter_sd_mm", config.noise.target_jitter_sd_mm),
        ("speaker_variation.stiffness_rel_sd", config.speaker_variation.stiffness_rel_sd),
        ("speaker_variation.target_sd_mm", config.speaker_variation.target_sd_mm),
        ("speaker_variation.velar_rel_sd", config.speaker_variation.velar_rel_sd),
    ):
        if not (value >= 0 and math.isfinite(value)):
            problems.append(f"{name} must be a finite value >= 0")
    return problems


def _checked_config(config: ScenarioConfig) -> None:
    problems = validate_config(config)
    if problems:
        raise ValueError("invalid scenario config: " + "; ".join(problems))


_NOISE_KEYS = {
    "position_sd_mm",
    "duration_jitter_sd",
    "timing_jitter_sd_ms",
    "target_jitter_sd_mm",
}
_VARIATION_KEYS = {"stiffness_rel_sd", "target_sd_mm", "velar_rel_sd"}
_CONFIG_KEYS = {
    "n_speakers",
    "tokens_per_condition",
    "conditions",
    "eccentric_delay_ms",
    "velar_blending_strength",
    "speaker_variation",
    "noise",
    "seed",
    "sample_rate_hz",
    "use_coupling_planner",
    "relax_stiffness_s2",
    "items",
}


def _sub_config(cls, data: dict, allowed: set[str], where: str):
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")
    return cls(**{k: float(v) for k, v in data.items()})


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from parsed JSON; unknown keys are errors."""
    if not isinstance(data, dict):
        raise ValueError("scenario config must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    try:
        if "noise" in data:
            kwargs["noise"] = _sub_config(NoiseModel, data["noise"], _NOISE_KEYS, "noise")
        if "speaker_variation" in data:
            kwargs["speaker_variation"] = _sub_config(
                SpeakerVariation, data["speaker_variation"], _VARIATION_KEYS, "speaker_variation"
            )
        for key in ("n_speakers", "tokens_per_condition", "seed"):
            if key in data:
                kwargs[key] = int(data[key])
        for key in (
            "eccentric_delay_ms",
            "velar_blending_strength",
            "sample_rate_hz",
            "relax_stiffness_s2",
        ):
            if key in data:
                kwargs[key] = float(data[key])
        if "conditions" in data:
            kwargs["conditions"] = tuple(str(c) for c in data["conditions"])
        if "items" in data:
            kwargs["items"] = tuple(str(i) for i in data["items"])
        if "use_coupling_planner" in data:
            kwargs["use_coupling_planner"] = bool(data["use_coupling_planner"])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed scenario config: {exc}") from exc
    config = ScenarioConfig(**kwargs)
    _checked_config(config)
    return config


def config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "n_speakers": config.n_speakers,
        "tokens_per_condition": config.tokens_per_condition,
        "conditions": list(config.conditions),
        "eccentric_delay_ms": config.eccentric_delay_ms,
        "velar_blending_strength": config.velar_blending_strength,
        "speaker_variation": {
            "stiffness_rel_sd": config.speaker_variation.stiffness_rel_sd,
            "target_sd_mm": config.speaker_variation.target_sd_mm,
            "velar_rel_sd": config.speaker_variation.velar_rel_sd,
        },
        "noise": {
            "position_sd_mm": config.noise.position_sd_mm,
            "duration_jitter_sd": config.noise.duration_jitter_sd,
            "timing_jitter_sd_ms": config.noise.timing_jitter_sd_ms,
            "target_jitter_sd_mm": config.noise.target_jitter_sd_mm,
        },
        "seed": config.seed,
        "sample_rate_hz": config.sample_rate_hz,
        "use_coupling_planner": config.use_coupling_planner,
        "relax_stiffness_s2": config.relax_stiffness_s2,
        "items": list(config.items),
    }


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"could not parse config {path}: {exc}") from exc
    return config_from_dict(data)


@dataclass(frozen=True)
class SpeakerParams:
    """One simulated speaker's fixed offsets from the canonical parameters."""

    id: str
    stiffness_scale: float
    la_target_delta_mm: float
    palatal_target_delta_mm: float
    velar_scale: float


def sample_speakers(config: ScenarioConfig) -> list[SpeakerParams]:
    """Draw the speaker population for a scenario (deterministic in the seed).

    Stiffness gets a relative Gaussian scale (clipped so every speaker's
    gestures still fit the utterance window), constriction targets get
    additive offsets, and the velar back target scales proportionally.
    """
    out = []
    sv = config.speaker_variation
    for si in range(config.n_speakers):
        rng = _rng(config.seed, _SPEAKER_STREAM, si)
        scale = float(np.clip(rng.normal(1.0, sv.stiffness_rel_sd), 0.6, 1.5))
        la = float(rng.normal(0.0, sv.target_sd_mm))
        pal = float(rng.normal(0.0, sv.target_sd_mm))
        vel = float(np.clip(rng.normal(1.0, sv.velar_rel_sd), 0.2, 2.0))
        out.append(
            SpeakerParams(
                id=f"S{si + 1}",
                stiffness_scale=scale,
                la_target_delta_mm=la,
                palatal_target_delta_mm=pal,
                velar_scale=vel,
            )
        )
    return out


def planned_eccentric_delay_ms(config: ScenarioConfig) -> float:
    """Palatal onset delay for the eccentric condition.

    By default this is the configured activation-time offset. With
    use_coupling_planner the same delay is routed through a two-node coupling
    graph (labial reference, palatal at the equivalent eccentric phase) and
    read back off the planner's onset placement.
    """
    if not config.use_coupling_planner:
        return config.eccentric_delay_ms
    period_ms = 2.0 * math.pi / DEFAULT_OMEGA0_RAD_S * 1000.0
    phi = wrap_phase(2.0 * math.pi * config.eccentric_delay_ms / period_ms)
    graph = CouplingGraph(
        omega0_rad_s=DEFAULT_OMEGA0_RAD_S,
        reference="lab",
        nodes=("lab", "pal"),
        edges=(CouplingEdge("lab", "pal", float(phi)),),
    )
    onsets = phases_to_onsets(solve_phases_ls(graph))
    return onsets["pal"] - onsets["lab"]


def _speaker_preset(config: ScenarioConfig, sp: SpeakerParams, delay_ms: float) -> PresetParams:
    p = PresetParams()
    return replace(
        p,
        sample_rate_hz=config.sample_rate_hz,
        eccentric_delay_ms=delay_ms,
        velar_weight=config.velar_blending_strength,
        stiffness_s2=p.stiffness_s2 * sp.stiffness_scale,
        velar_stiffness_s2=p.velar_stiffness_s2 * sp.stiffness_scale,
        la_target_mm=p.la_target_mm + sp.la_target_delta_mm,
        palatal_target_mm=p.palatal_target_mm + sp.palatal_target_delta_mm,
        velar_target_mm=p.velar_target_mm * sp.velar_scale,
    )


@dataclass
class _TokenPlan:
    speaker: str
    condition: str
    item: str
    rep: int
    score: GesturalScore
    rng: np.random.Generator  # continued for measurement noise after the sim


def _plan_tokens(config: ScenarioConfig, speakers: Sequence[SpeakerParams]) -> list[_TokenPlan]:
    delay_ms = planned_eccentric_delay_ms(config)
    noise = config.noise
    plans = []
    for si, sp in enumerate(speakers):
        base = _speaker_preset(config, sp, delay_ms)
        for cond in config.conditions:
            ci = CONDITIONS.index(cond)
            for ti in range(config.tokens_per_condition):
                rng = _rng(config.seed, _TOKEN_STREAM, si, ci, ti)
                # fixed draw order: onsets/durations/targets, then (after the
                # sim) position noise per channel
                params = replace(
                    base,
                    labial_onset_delta_ms=float(rng.normal(0.0, noise.timing_jitter_sd_ms)),
                    labial_duration_scale=float(rng.lognormal(0.0, noise.duration_jitter_sd)),
                    palatal_onset_delta_ms=float(rng.normal(0.0, noise.timing_jitter_sd_ms)),
                    palatal_duration_scale=float(rng.lognormal(0.0, noise.duration_jitter_sd)),
                    velar_onset_delta_ms=float(rng.normal(0.0, noise.timing_jitter_sd_ms)),
                    labial_target_delta_mm=float(rng.normal(0.0, noise.target_jitter_sd_mm)),
                    palatal_target_delta_mm=float(rng.normal(0.0, noise.target_jitter_sd_mm)),
                    velar_target_delta_mm=float(rng.normal(0.0, noise.target_jitter_sd_mm)),
                )
                plans.append(
                    _TokenPlan(
                        speaker=sp.id,
                        condition=cond,
                        item=config.items[ti % len(config.items)],
                        rep=ti // len(config.items) + 1,
                        score=preset_scenario(cond, params),
                        rng=rng,
                    )
                )
    return plans


def _simulate_plans(
    plans: Sequence[_TokenPlan], relax_stiffness_s2: float, dt_ms: float = SIM_DT_MS
) -> list[dict[str, Trajectory]]:
    out: list[dict[str, Trajectory]] = []
    for lo in range(0, len(plans), SIM_BATCH):
        batch = [p.score for p in plans[lo : lo + SIM_BATCH]]
        out.extend(integrate_many(batch, dt_ms=dt_ms, relax_stiffness_s2=relax_stiffness_s2))
    return out


def _gesture_window(score: GesturalScore, gesture_id: str) -> tuple[float, float]:
    g = next(g for g in score.gestures if g.id == gesture_id)
    return (
        max(g.t_on_ms - PARSE_WINDOW_PAD_MS, 0.0),
        min(g.t_off_ms + PARSE_WINDOW_PAD_MS, score.duration_ms),
    )


def measure_token(
    score: GesturalScore, la: Trajectory, tb: Trajectory
) -> tuple[landmarks.GestureLandmarks, landmarks.GestureLandmarks, float]:
    """Landmark both gestures of a token and probe TB at the palatal onset.

    Parse windows come from the score's true activation intervals padded by
    PARSE_WINDOW_PAD_MS; the closure on LA is a decreasing movement, the
    fronting on TB_CL an increasing one. Returns (g1, g2, tb position at the
    detected palatal onset). Raises landmarks.ParseError when either movement
    cannot be labeled.
    """
    g1 = landmarks.find_gesture(la, _gesture_window(score, "lab"), "decreasing")
    g2 = landmarks.find_gesture(tb, _gesture_window(score, "pal"), "increasing")
    return g1, g2, stats.tb_at(tb, g2.onset_ms)


def _failure_record(plan: _TokenPlan) -> stats.TokenRecord:
    return stats.TokenRecord(
        speaker=plan.speaker,
        condition=plan.condition,
        item=plan.item,
        rep=plan.rep,
        g1_onset_ms=math.nan,
        g1_offset_ms=math.nan,
        g2_onset_ms=math.nan,
        g1_duration_ms=math.nan,
        lag_ms=math.nan,
        tb_pos_mm=math.nan,
        excluded=True,
        exclusion_reason=PARSE_FAILURE,
    )


def _measure_plans(
    config: ScenarioConfig,
    plans: Sequence[_TokenPlan],
    trajectories: Sequence[dict[str, Trajectory]],
) -> tuple[list[stats.TokenRecord], list[dict[str, Trajectory]]]:
    records = []
    noisy_all = []
    sd = config.noise.position_sd_mm
    for plan, trajs in zip(plans, trajectories):
        noisy = {ch: add_position_noise(trajs[ch], plan.rng, sd) for ch in ("LA", "TB_CL")}
        noisy_all.append(noisy)
        smoothed = {
            ch: Trajectory(
                channel=ch,
                sample_rate_hz=noisy[ch].sample_rate_hz,
                samples=smoothing.robust_smooth(noisy[ch].samples),
                t0_ms=noisy[ch].t0_ms,
            )
            for ch in noisy
        }
        try:
            g1, g2, tb_pos = measure_token(plan.score, smoothed["LA"], smoothed["TB_CL"])
        except (landmarks.ParseError, ValueError):
            records.append(_failure_record(plan))
            continue
        g1_on = round(g1.onset_ms, 3)
        g1_off = round(g1.offset_ms, 3)
        g2_on = round(g2.onset_ms, 3)
        records.append(
            stats.TokenRecord(
                speaker=plan.speaker,
                condition=plan.condition,
                item=plan.item,
                rep=plan.rep,
                g1_onset_ms=g1_on,
                g1_offset_ms=g1_off,
                g2_onset_ms=g2_on,
                g1_duration_ms=round(g1_off - g1_on, 3),
                lag_ms=round(g2_on - g1_on, 3),
                tb_pos_mm=round(tb_pos, 3),
            )
        )
    return records, noisy_all


def _zscore_tb(
    records: list[stats.TokenRecord], degenerate: list[str]
) -> list[stats.TokenRecord]:
    """Fill tb_pos_z within speaker from included-token statistics.

    Zero-spread speakers (silent noise) get z = 0 and a degenerate note
    instead of an error, so deterministic runs still produce a full table.
    """
    out = list(records)
    for sp in sorted({t.speaker for t in records}):
        rows = [k for k, t in enumerate(records) if t.speaker == sp]
        vals = np.array(
            [records[k].tb_pos_mm for k in rows if not records[k].excluded], dtype=float
        )
        if len(vals) >= 2 and float(np.std(vals, ddof=1)) > 0:
            mean = float(vals.mean())
            sd = float(np.std(vals, ddof=1))
            for k in rows:
                out[k] = replace(out[k], tb_pos_z=round((out[k].tb_pos_mm - mean) / sd, 3))
        else:
            degenerate.append(f"speaker {sp}: zero TB spread, z-scores set to 0")
            for k in rows:
                out[k] = replace(out[k], tb_pos_z=0.0)
    return out


def _cell_summary(records: list[stats.TokenRecord], n_perm: int, seed: int) -> list[dict]:
    rows = []
    cells = sorted(
        {(t.speaker, t.condition) for t in records},
        key=lambda sc: (sc[0], CONDITIONS.index(sc[1])),
    )
    for k, (sp, cond) in enumerate(cells):
        cell = [t for t in records if t.speaker == sp and t.condition == cond and not t.excluded]
        row: dict = {"speaker": sp, "condition": cond, "n": len(cell)}
        dur = [t.g1_duration_ms for t in cell]
        lag = [t.lag_ms for t in cell]
        try:
            fit = stats.ols(dur, lag)
            p = stats.perm_test_slope(dur, lag, n_perm=n_perm, seed=_stat_seed(seed, k))
            row.update(slope=fit.slope, intercept=fit.intercept, r2=fit.r2, p_perm=p)
        except ValueError:
            row.update(slope=None, intercept=None, r2=None, p_perm=None)
        row["mean_lag_ms"] = float(np.mean(lag)) if cell else None
        row["mean_tb_z"] = float(np.mean([t.tb_pos_z for t in cell])) if cell else None
        rows.append(row)
    return rows


def _speaker_contrasts(records: list[stats.TokenRecord], measure: str) -> dict[str, float]:
    out = {}
    for sp in sorted({t.speaker for t in records}):
        a = [
            getattr(t, measure)
            for t in records
            if t.speaker == sp and t.condition == ASSIMILATORY and not t.excluded
        ]
        u = [
            getattr(t, measure)
            for t in records
            if t.speaker == sp and t.condition == UNDERLYING and not t.excluded
        ]
        if a and u:
            out[sp] = float(np.mean(a) - np.mean(u))
    return out


def analyze_tokens(
    records: Sequence[stats.TokenRecord],
    n_perm: int = N_PERM_DEFAULT,
    seed: int = 0,
) -> tuple[list[stats.TokenRecord], list[dict], dict]:
    """Screen, z-score, and summarize a token table.

    Recomputes exclusion flags and z-scores from the measured columns
    (parse-failure rows stay excluded as-is), so the result depends only on
    values that survive a CSV round trip. Returns (final records, summary
    rows, analysis dict). Cells whose regression is undefined get None
    entries and a note in analysis["degenerate"].
    """
    ok = [t for t in records if t.exclusion_reason != PARSE_FAILURE]
    n_failures = len(records) - len(ok)
    if not ok:
        raise ValueError("no successfully measured tokens to analyze")
    degenerate: list[str] = []
    screened = stats.remove_outliers(ok)
    screened = _zscore_tb(screened, degenerate)

    final: list[stats.TokenRecord] = []
    done = iter(screened)
    for t in records:
        final.append(t if t.exclusion_reason == PARSE_FAILURE else next(done))

    summary_rows = _cell_summary(screened, n_perm, seed)

    present = [c for c in CONDITIONS if any(t.condition == c for t in screened)]
    classification: dict[str, dict] = {}
    for ci, cond in enumerate(present):
        subset = [t for t in screened if t.condition == cond]
        try:
            label, fit = stats.classify_coordination(
                subset, n_perm=n_perm, seed=_stat_seed(seed, 100 + ci)
            )
            classification[cond] = {
                "label": label,
                "slope": fit.slope,
                "r2": fit.r2,
                "p_perm": fit.p_perm,
                "n": fit.n,
            }
        except ValueError as exc:
            degenerate.append(f"classification {cond}: {exc}")
            classification[cond] = {"label": "DEGENERATE", "note": str(exc)}

    contrasts: dict[str, dict] = {}
    if ASSIMILATORY in present and UNDERLYING in present:
        for k, measure in enumerate(("lag_ms", "tb_pos_mm", "tb_pos_z")):
            try:
                diff, p = stats.condition_contrast(
                    screened,
                    measure,
                    ASSIMILATORY,
                    UNDERLYING,
                    n_perm=n_perm,
                    seed=_stat_seed(seed, 200 + k),
                )
                contrasts[measure] = {"difference": diff, "p_perm": p}
            except ValueError as exc:
                degenerate.append(f"contrast {measure}: {exc}")

    n_dur = sum(1 for t in final if "g1_duration" in t.exclusion_reason)
    n_lag = sum(1 for t in final if t.exclusion_reason and "lag" in t.exclusion_reason)
    exclusions = {
        "g1_duration": {
            "count": n_dur,
            "fraction": n_dur / len(ok),
            "reference_fraction": REFERENCE_EXCLUSION_FRACTION["g1_duration"],
        },
        "lag": {
            "count": n_lag,
            "fraction": n_lag / len(ok),
            "reference_fraction": REFERENCE_EXCLUSION_FRACTION["lag"],
        },
        "parse_failure": {"count": n_failures, "fraction": n_failures / len(records)},
    }

    onset_coupled = [
        t
        for t in screened
        if not t.excluded and t.condition in (UNDERLYING, ASSIMILATORY)
    ]
    if onset_coupled:
        durs = [t.g1_duration_ms for t in onset_coupled]
        lags = [t.lag_ms for t in onset_coupled]
        sanity = {
            "g1_duration_ms": {"range": [min(durs), max(durs)], "bounds": list(SANITY_G1_RANGE_MS)},
            "lag_ms": {"range": [min(lags), max(lags)], "bounds": list(SANITY_LAG_RANGE_MS)},
            "ok": bool(
                SANITY_G1_RANGE_MS[0] <= min(durs)
                and max(durs) <= SANITY_G1_RANGE_MS[1]
                and SANITY_LAG_RANGE_MS[0] <= min(lags)
                and max(lags) <= SANITY_LAG_RANGE_MS[1]
            ),
        }
    else:
        sanity = {"ok": True, "note": "no onset-coupled tokens in the run"}

    analysis = {
        "n_tokens": len(records),
        "n_measured": len(ok),
        "summary": summary_rows,
        "classification": classification,
        "contrasts": contrasts,
        "per_speaker_tb_contrast_mm": _speaker_contrasts(screened, "tb_pos_mm"),
        "per_speaker_tb_contrast_z": _speaker_contrasts(screened, "tb_pos_z"),
        "per_speaker_lag_contrast_ms": _speaker_contrasts(screened, "lag_ms"),
        "exclusions": exclusions,
        "scale_sanity": sanity,
        "degenerate": degenerate,
        "n_perm": n_perm,
        "stat_seed": seed,
    }
    return final, summary_rows, analysis


def _token_basename(t: stats.TokenRecord) -> str:
    return f"{t.speaker}_{t.condition}_{t.item}_r{t.rep:03d}.csv"


def run_scenario(
    config: ScenarioConfig,
    out_dir: str | Path,
    n_perm: int = N_PERM_DEFAULT,
    write_trajectories: bool = True,
) -> dict:
    """Run a full scenario and write its outputs under out_dir.

    Emits tokens.csv, summary.csv, report.json, and (unless disabled) the
    noisy trajectory of every token under trajectories/. Tokens whose parsing
    fails are kept in the table as excluded rows; more than
    MAX_PARSE_FAILURE_FRACTION of them aborts the run with per-cell counts.
    Returns the report dict.
    """
    _checked_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    speakers = sample_speakers(config)
    plans = _plan_tokens(config, speakers)
    trajectories = _simulate_plans(plans, config.relax_stiffness_s2)
    records, noisy = _measure_plans(config, plans, trajectories)

    n_failed = sum(1 for t in records if t.exclusion_reason == PARSE_FAILURE)
    if n_failed > MAX_PARSE_FAILURE_FRACTION * len(records):
        counts: dict[str, int] = {}
        for t in records:
            if t.exclusion_reason == PARSE_FAILURE:
                key = f"{t.speaker}/{t.condition}"
                counts[key] = counts.get(key, 0) + 1
        raise RuntimeError(
            f"{n_failed}/{len(records)} tokens failed to parse; failures by cell: {counts}"
        )

    final, summary_rows, analysis = analyze_tokens(records, n_perm=n_perm, seed=config.seed)

    tokens_path = out / "tokens.csv"
    summary_path = out / "summary.csv"
    stats.write_token_csv(final, tokens_path)
    stats.write_summary_csv(summary_rows, summary_path)

    files = {"tokens": str(tokens_path), "summary": str(summary_path)}
    if write_trajectories:
        traj_dir = out / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        for t, trajs in zip(final, noisy):
            write_trajectory_csv(trajs, traj_dir / _token_basename(t))
        files["trajectories"] = str(traj_dir)

    report = {
        "config": config_to_dict(config),
        "speakers": [
            {
                "id": sp.id,
                "stiffness_scale": sp.stiffness_scale,
                "la_target_delta_mm": sp.la_target_delta_mm,
                "palatal_target_delta_mm": sp.palatal_target_delta_mm,
                "velar_scale": sp.velar_scale,
            }
            for sp in speakers
        ],
        "analysis": analysis,
        "files": files,
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    report["files"]["report"] = str(report_path)
    return report


def blend_sweep(
    config: ScenarioConfig, weights: Sequence[float] = BLEND_SWEEP_WEIGHTS
) -> dict:
    """Noiseless equal-stiffness probe of blending strength alone.

    Simulates one canonical speaker at high sample rate with the velar given
    the same stiffness as everything else and no eccentric delay, pairing
    each blending weight's eccentric token against the shared plain token.
    Reports the detected lag contrast (expected to vanish: equal stiffness
    and simultaneous onsets leave the detected palatal onset unchanged) and
    the TB-position contrast at the detected onset (monotone retraction).
    """
    base = PresetParams(sample_rate_hz=2000.0, eccentric_delay_ms=0.0)
    base = replace(
        base,
        velar_stiffness_s2=base.stiffness_s2,
        velar_target_mm=BLEND_SWEEP_VELAR_TARGET_MM,
    )
    scores = [preset_scenario(UNDERLYING, base)]
    for w in weights:
        scores.append(preset_scenario(ASSIMILATORY, replace(base, velar_weight=float(w))))
    trajectories = integrate_many(scores, dt_ms=0.25, relax_stiffness_s2=config.relax_stiffness_s2)

    measured = []
    for score, trajs in zip(scores, trajectories):
        g1, g2, tb_pos = measure_token(score, trajs["LA"], trajs["TB_CL"])
        measured.append((g2.onset_ms - g1.onset_ms, tb_pos))
    (lag_u, tb_u), rest = measured[0], measured[1:]
    return {
        "weights": [float(w) for w in weights],
        "lag_contrast_ms": [lag - lag_u for lag, _ in rest],
        "tb_contrast_mm": [tb - tb_u for _, tb in rest],
        "baseline_lag_ms": lag_u,
        "baseline_tb_mm": tb_u,
    }


def experiment_54(
    config: ScenarioConfig,
    out_dir: str | Path,
    parts: Sequence[str] = ("A", "B", "C"),
    n_perm: int = N_PERM_DEFAULT,
) -> dict:
    """The three-explanation experiment: blending alone, offset coupling,
    eccentric in-phase coupling.

    (A) sweeps velar blending strength in a noiseless equal-stiffness paired
    probe; (B) runs the offset-coupled condition through the full noisy
    pipeline, which should classify SEQUENCE (and so fail to match flat
    observed slopes); (C) runs the default scenario, whose eccentric delay
    yields the lag contrast while both onset-coupled conditions stay COMPLEX.
    """
    _checked_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"config": config_to_dict(config)}

    if "A" in parts:
        report["A"] = blend_sweep(config)

    if "B" in parts:
        config_b = replace(config, conditions=(SEQUENCE,))
        rep = run_scenario(config_b, out / "B", n_perm=n_perm, write_trajectories=False)
        report["B"] = {
            "classification": rep["analysis"]["classification"][SEQUENCE],
            "files": rep["files"],
        }

    if "C" in parts:
        conds = config.conditions
        if UNDERLYING not in conds or ASSIMILATORY not in conds:
            conds = CONDITIONS
        config_c = replace(config, conditions=conds)
        rep = run_scenario(config_c, out / "C", n_perm=n_perm, write_trajectories=False)
        report["C"] = {
            "classification": rep["analysis"]["classification"],
            "contrasts": rep["analysis"]["contrasts"],
            "per_speaker_tb_contrast_mm": rep["analysis"]["per_speaker_tb_contrast_mm"],
            "files": rep["files"],
        }

    path = Path(out) / "exp54_report.json"
    path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    report["files"] = {"report": str(path)}
    return report
