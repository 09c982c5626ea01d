"""Articulatory gesture kinematics: scores, task dynamics, landmark parsing,
and the synthetic timing experiments built on them."""

from .dynamics import (
    Trajectory,
    analytic_step_response,
    blend_parameters,
    integrate,
    integrate_many,
    read_trajectory_csv,
    write_trajectory_csv,
)
from .harness import (
    NoiseModel,
    ScenarioConfig,
    SpeakerVariation,
    analyze_tokens,
    experiment_54,
    load_config,
    run_scenario,
)
from .landmarks import GestureLandmarks, NoMovement, NoReturnMovement, ParseError, compute_la, find_gesture
from .planner import (
    CouplingEdge,
    CouplingGraph,
    PhaseSolution,
    c_center_graph,
    load_graph,
    phases_to_onsets,
    save_graph,
    simulate_phases,
    solve_phases_ls,
)
from .plots import emit_plots
from .score import (
    ASSIMILATORY,
    CONDITIONS,
    SEQUENCE,
    UNDERLYING,
    Gesture,
    GesturalScore,
    PresetParams,
    TractVariable,
    active_gestures,
    load_score,
    preset_scenario,
    save_score,
    validate_score,
)
from .smoothing import gcv_select, robust_smooth, smooth, velocity
from .stats import (
    RegressionResult,
    TokenRecord,
    classify_coordination,
    condition_contrast,
    ols,
    perm_test_slope,
    read_token_csv,
    remove_outliers,
    write_token_csv,
    zscore_by_group,
)

__version__ = "0.1.0"
