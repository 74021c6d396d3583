"""Directed-energy weed-control simulator: dose model, detector, activation planner, missions."""

from .detect import (
    ClassificationTally,
    ConfusionSpec,
    DetectionReport,
    accuracy,
    classify_cell,
    mean_accuracy,
    perfect_report,
    preset,
    survey_field,
)
from .dose import (
    DoseRecipe,
    ExposureLedger,
    accumulate,
    dwell_time_for_target,
    lethality,
    phase1_recipe,
    phase2_recipe,
)
from .errors import ValidationError
from .field import CellClass, FieldGrid, WorldPose, build_field, cell_at, load_field, save_field
from .sched import (
    ActivationPlan,
    ActivationStep,
    ArrayLayout,
    brute_force_plan,
    plan_continuous,
    plan_move_then_dwell,
    required_dwell,
    simulate_plan,
)
from .sim import MissionMetrics, RobotConfig, collateral_threshold, replay, run_mission

__version__ = "0.1.0"
