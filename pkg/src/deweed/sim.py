"""End-to-end missions: survey, plan, execute with lateral wiggle, score."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .detect import ClassificationTally, ConfusionSpec, DetectionReport, survey_field
from .dose import DoseRecipe
from .errors import ValidationError
from .field import CellClass, FieldGrid, WorldPose
from .sched import (
    DEFAULT_TRANSIT_SPEED,
    DWELL,
    ActivationPlan,
    ActivationStep,
    ArrayLayout,
    footprint,
    plan_continuous,
    plan_move_then_dwell,
    plan_to_csv,
)

DEFAULT_COLLATERAL_THRESHOLD = 0.25
KILL_TOL = 1e-9

MODE_DWELL = "dwell"
MODE_CONTINUOUS = "continuous"
MODES = (MODE_DWELL, MODE_CONTINUOUS)


@dataclass(frozen=True)
class RobotConfig:
    """Vehicle behaviour.

    ``wiggle_sigma`` is the lateral drift in metres per square-root metre
    travelled. ``speed`` is the constant speed used in continuous mode.
    ``camera_lead`` overrides the layout's value when given.
    """

    transit_speed: float = DEFAULT_TRANSIT_SPEED
    wiggle_sigma: float = 0.0
    course_correction: bool = False
    camera_lead: Optional[float] = None
    speed: float = DEFAULT_TRANSIT_SPEED

    def __post_init__(self):
        if not self.transit_speed > 0 or not self.speed > 0:
            raise ValidationError("robot speeds must be positive")
        if not self.wiggle_sigma >= 0:
            raise ValidationError(f"wiggle_sigma must be >= 0, got {self.wiggle_sigma}")
        if self.camera_lead is not None and self.camera_lead < 0:
            raise ValidationError("camera_lead must be >= 0")


def collateral_threshold(recipe: Optional[DoseRecipe] = None, threshold: float = DEFAULT_COLLATERAL_THRESHOLD) -> float:
    """Lethality above which an irradiated crop cell counts as damaged.

    A bookkeeping constant; the recipe argument is accepted so callers can
    later key the threshold on the band mix.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"collateral threshold must lie in [0, 1], got {threshold}")
    return threshold


@dataclass(frozen=True)
class MissionMetrics:
    weed_kill_fraction: float
    total_weeds: int
    killed_weeds: int
    missed_weeds: int
    underdosed_weeds: int
    crop_collateral: int
    total_time: float
    total_energy: float
    detection_tally: ClassificationTally
    mismatch_events: int
    verdict: str
    mode: str
    seed: Optional[int] = None

    def as_row(self) -> dict:
        row = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "detection_tally":
                for k in ("tp", "tn", "fp", "fn"):
                    row[k] = getattr(value, k)
            else:
                row[f.name] = value
        return row

    def to_csv(self) -> str:
        row = self.as_row()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(row.keys())
        w.writerow(_fmt(v) for v in row.values())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.as_row(), sort_keys=True)

    @classmethod
    def from_csv(cls, text: str) -> "MissionMetrics":
        rec = next(csv.DictReader(io.StringIO(text)))
        return cls.from_row(rec)

    @classmethod
    def from_row(cls, rec: dict) -> "MissionMetrics":
        ints = ("total_weeds", "killed_weeds", "missed_weeds", "underdosed_weeds", "crop_collateral", "mismatch_events")
        floats = ("weed_kill_fraction", "total_time", "total_energy")
        kw = {k: int(rec[k]) for k in ints}
        kw.update({k: float(rec[k]) for k in floats})
        kw["detection_tally"] = ClassificationTally(*(int(rec[k]) for k in ("tp", "tn", "fp", "fn")))
        kw["verdict"] = rec["verdict"]
        kw["mode"] = rec["mode"]
        seed = rec.get("seed")
        kw["seed"] = None if seed in (None, "", "None") else int(seed)
        return cls(**kw)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return value


@dataclass
class MissionResult:
    metrics: MissionMetrics
    plan: ActivationPlan
    executed: tuple
    report: DetectionReport
    grid: FieldGrid
    lethality: np.ndarray

    def executed_csv(self) -> str:
        return plan_to_csv(self.executed, self.plan.layout)


def _stream(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def execute_plan(grid: FieldGrid, plan: ActivationPlan, robot: RobotConfig, rng: np.random.Generator):
    """Run a plan with lateral drift; mutates ``grid``.

    The lateral offset is a Gaussian random walk over distance travelled.
    Each moving step draws two increments (to mid-step and to the end) so the
    random stream does not depend on whether course correction is enabled.
    Returns ``(executed_steps, mismatch_events)``.
    """
    layout = plan.layout
    plan.validate(layout)
    offset = 0.0
    executed = []
    mismatches = 0
    for step in plan.steps:
        if step.mode == DWELL:
            if robot.course_correction:
                offset = 0.0
            credit_offset = offset
            start_offset = offset
        else:
            half = math.sqrt(0.5 * step.distance)
            d1, d2 = (float(v) for v in rng.normal(0.0, 1.0, size=2))
            start_offset = offset
            credit_offset = offset + robot.wiggle_sigma * half * d1
            offset = credit_offset + robot.wiggle_sigma * half * d2
        if step.active_set:
            planned = dict(footprint(layout, grid, step))
            for k, cell in footprint(layout, grid, step, credit_offset):
                if cell != planned[k]:
                    mismatches += 1
                if cell is not None:
                    grid.expose(cell[0], cell[1], layout.recipe, step.duration)
        x, y = step.array_pose.transform(0.0, start_offset)
        executed.append(
            ActivationStep(step.active_set, step.duration, WorldPose(x, y, step.array_pose.heading), step.mode, step.speed)
        )
    return tuple(executed), mismatches


def execute_mission(
    grid: FieldGrid,
    layout: ArrayLayout,
    robot: RobotConfig,
    detector: ConfusionSpec,
    target: float = 1.0,
    mode: str = MODE_DWELL,
    seed=None,
    collateral: float = DEFAULT_COLLATERAL_THRESHOLD,
) -> MissionResult:
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if robot.camera_lead is not None:
        layout = dataclasses.replace(layout, camera_lead=robot.camera_lead)
    detect_rng, wiggle_rng = _stream(seed, 2)
    work = grid.copy()
    work.reset_ledgers()

    report = survey_field(work, detector, detect_rng)
    if mode == MODE_DWELL:
        plan = plan_move_then_dwell(work, report, layout, target, transit_speed=robot.transit_speed)
        verdict = "Feasible"
    else:
        plan = plan_continuous(work, report, layout, robot.speed, target, transit_speed=robot.transit_speed)
        verdict = plan.verdict.label

    executed, mismatches = execute_plan(work, plan, robot, wiggle_rng)

    leth = work.lethality_map(layout.recipe)
    truth = work.truth
    weed = truth == CellClass.WEED
    killed = weed & (leth >= target - KILL_TOL)
    detected = report.reported == CellClass.WEED
    total_weeds = int(np.count_nonzero(weed))
    n_killed = int(np.count_nonzero(killed))
    threshold = collateral_threshold(layout.recipe, collateral)
    metrics = MissionMetrics(
        weed_kill_fraction=n_killed / total_weeds if total_weeds else 1.0,
        total_weeds=total_weeds,
        killed_weeds=n_killed,
        missed_weeds=int(np.count_nonzero(weed & ~detected & ~killed)),
        underdosed_weeds=int(np.count_nonzero(weed & detected & ~killed)),
        crop_collateral=int(np.count_nonzero((truth == CellClass.CROP) & (leth >= threshold) & (leth > 0))),
        total_time=math.fsum(s.duration for s in executed),
        total_energy=math.fsum(s.energy(layout) for s in executed),
        detection_tally=report.tally,
        mismatch_events=mismatches,
        verdict=verdict,
        mode=mode,
        seed=seed if isinstance(seed, (int, np.integer)) else None,
    )
    return MissionResult(metrics, plan, executed, report, work, leth)


def run_mission(
    grid: FieldGrid,
    layout: ArrayLayout,
    robot: RobotConfig,
    detector: ConfusionSpec,
    target: float = 1.0,
    mode: str = MODE_DWELL,
    seed=None,
    collateral: float = DEFAULT_COLLATERAL_THRESHOLD,
) -> MissionMetrics:
    return execute_mission(grid, layout, robot, detector, target, mode, seed, collateral).metrics


def replay(seed, scenario) -> MissionMetrics:
    """Re-run a scenario for one seed; identical inputs give identical metrics."""
    return scenario.run(seed).metrics
