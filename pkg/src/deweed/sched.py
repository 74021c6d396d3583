"""Power-constrained activation planning for the source array.

Geometry
--------
The array is ``rows`` sources across track (y) by ``cols`` sources along
track (x, the direction of travel). Source ``k = i * cols + j`` sits at local
offset ``((j + 0.5) * pitch, (i + 0.5) * pitch)`` from the array pose and
irradiates exactly the one cell beneath its centre.

The robot sweeps the field in lanes of ``rows`` cells, always driving +x. Each
lane starts with the cameras at the field edge (array origin at
``-(cols * pitch + camera_lead)``) and ends with the array past the last
column. Lane travel is therefore fixed for a field; plans differ only in how
weed cells are grouped into stops and batches.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .dose import DoseRecipe, dwell_time_for_target
from .errors import InstanceTooLargeError, UnreachableCellError, ValidationError
from .field import FieldGrid, WorldPose, cell_at

KMH = 1000.0 / 3600.0  # m/s
DEFAULT_TRANSIT_SPEED = 1.0 * KMH
PAPER_STATED_CAP = 16

BRUTE_FORCE_MAX_WEEDS = 12
BRUTE_FORCE_MAX_POSITIONS = 6

_FEASIBLE_RTOL = 1e-12


@dataclass(frozen=True)
class ArrayLayout:
    rows: int = 7
    cols: int = 15
    source_pitch: float = 0.102
    per_source_power: float = 410.0
    power_budget: float = 6400.0
    max_simultaneous: Optional[int] = None
    honor_paper_16: bool = False
    recipe: DoseRecipe = field(default_factory=DoseRecipe)
    source_height: float = 0.1524  # 6 in
    camera_lead: float = 0.25

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"array must have at least one source, got {self.rows} x {self.cols}")
        if not self.source_pitch > 0:
            raise ValidationError(f"source_pitch must be positive, got {self.source_pitch}")
        if not self.per_source_power > 0 or not self.power_budget > 0:
            raise ValidationError("per_source_power and power_budget must be positive")
        if self.camera_lead < 0 or self.source_height < 0:
            raise ValidationError("camera_lead and source_height must be >= 0")
        if self.max_simultaneous is None:
            cap = PAPER_STATED_CAP if self.honor_paper_16 else int(self.power_budget // self.per_source_power)
            object.__setattr__(self, "max_simultaneous", cap)
        cap = self.max_simultaneous
        if int(cap) != cap or cap < 1:
            raise ValidationError(f"max_simultaneous must be an integer >= 1, got {cap}")
        if self.honor_paper_16:
            if cap > PAPER_STATED_CAP:
                raise ValidationError(
                    f"max_simultaneous={cap} exceeds the acknowledged {PAPER_STATED_CAP}-source override"
                )
        elif cap * self.per_source_power > self.power_budget:
            raise ValidationError(
                f"power budget violated: max_simultaneous={cap} x {self.per_source_power:g} W = "
                f"{cap * self.per_source_power:g} W > {self.power_budget:g} W "
                f"(set honor_paper_16 to accept the stated {PAPER_STATED_CAP}-source limit)"
            )

    @property
    def n_sources(self) -> int:
        return self.rows * self.cols

    @property
    def cap(self) -> int:
        return int(self.max_simultaneous)

    def source_offset(self, k: int) -> tuple[float, float]:
        i, j = divmod(k, self.cols)
        return (j + 0.5) * self.source_pitch, (i + 0.5) * self.source_pitch

    def power_ok(self, n_active: int) -> bool:
        if n_active > self.cap:
            return False
        if n_active * self.per_source_power <= self.power_budget:
            return True
        return self.honor_paper_16 and n_active <= PAPER_STATED_CAP

    def exposure_window(self, speed: float) -> float:
        """Seconds a cell spends under the passing row of sources."""
        if not speed > 0:
            raise ValidationError(f"speed must be positive, got {speed}")
        return self.cols * self.source_pitch / speed


DWELL = "dwell"
MOVING = "moving"


@dataclass(frozen=True)
class ActivationStep:
    active_set: frozenset
    duration: float
    array_pose: WorldPose
    mode: str = DWELL
    speed: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "active_set", frozenset(int(k) for k in self.active_set))
        if not self.duration > 0:
            raise ValidationError(f"step duration must be > 0, got {self.duration}")
        if self.mode not in (DWELL, MOVING):
            raise ValidationError(f"unknown step mode {self.mode!r}")
        if self.mode == MOVING and not self.speed > 0:
            raise ValidationError("moving steps need a positive speed")
        if self.mode == DWELL and self.speed != 0:
            raise ValidationError("dwell steps have zero speed")

    @property
    def distance(self) -> float:
        return self.speed * self.duration

    def energy(self, layout: ArrayLayout) -> float:
        return len(self.active_set) * layout.per_source_power * self.duration

    def end_pose(self) -> WorldPose:
        x, y = self.array_pose.transform(self.distance, 0.0)
        return WorldPose(x, y, self.array_pose.heading)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    exposure_window: float
    required_dwell: float
    bottleneck_time: Optional[float] = None
    underdosed: tuple = ()
    reason: str = ""

    @property
    def label(self) -> str:
        return "Feasible" if self.feasible else "Infeasible"


@dataclass(frozen=True)
class ActivationPlan:
    steps: tuple
    layout: ArrayLayout
    verdict: Optional[Feasibility] = None

    @property
    def total_time(self) -> float:
        return math.fsum(s.duration for s in self.steps)

    @property
    def total_energy(self) -> float:
        return math.fsum(s.energy(self.layout) for s in self.steps)

    @property
    def activation_steps(self) -> list:
        return [s for s in self.steps if s.active_set]

    @property
    def dwell_time(self) -> float:
        return math.fsum(s.duration for s in self.steps if s.mode == DWELL)

    def validate(self, layout: Optional[ArrayLayout] = None) -> None:
        layout = layout or self.layout
        for idx, step in enumerate(self.steps):
            bad = [k for k in step.active_set if not 0 <= k < layout.n_sources]
            if bad:
                raise ValidationError(f"step {idx}: source index out of range {sorted(bad)}")
            if not layout.power_ok(len(step.active_set)):
                raise ValidationError(
                    f"step {idx}: {len(step.active_set)} active sources exceed the power cap "
                    f"({layout.cap} sources, {layout.power_budget:g} W)"
                )

    def to_csv(self) -> str:
        return plan_to_csv(self.steps, self.layout)


def plan_to_csv(steps: Iterable[ActivationStep], layout: ArrayLayout) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step_index", "mode", "pose_x", "pose_y", "duration_s", "active_source_indices", "step_energy_j"])
    for i, s in enumerate(steps):
        mode = DWELL if s.mode == DWELL else f"{MOVING}:{float(s.speed)!r}"
        w.writerow([
            i,
            mode,
            repr(float(s.array_pose.x)),
            repr(float(s.array_pose.y)),
            repr(float(s.duration)),
            ";".join(str(k) for k in sorted(s.active_set)),
            repr(float(s.energy(layout))),
        ])
    return buf.getvalue()


def plan_from_csv(text: str, layout: ArrayLayout) -> ActivationPlan:
    steps = []
    for rec in csv.DictReader(io.StringIO(text)):
        mode = rec["mode"]
        if mode == DWELL:
            speed = 0.0
        elif mode.startswith(MOVING + ":"):
            speed = float(mode.split(":", 1)[1])
            mode = MOVING
        else:
            raise ValidationError(f"unknown step mode {mode!r} in plan CSV")
        active = rec["active_source_indices"]
        steps.append(
            ActivationStep(
                frozenset(int(k) for k in active.split(";")) if active else frozenset(),
                float(rec["duration_s"]),
                WorldPose(float(rec["pose_x"]), float(rec["pose_y"])),
                mode,
                speed,
            )
        )
    return ActivationPlan(tuple(steps), layout)


# ---------------------------------------------------------------- geometry


def required_dwell(layout: ArrayLayout, target: float) -> float:
    return dwell_time_for_target(layout.recipe, target)


def lane_offsets(field_rows: int, array_rows: int) -> list[int]:
    top = max(0, field_rows - array_rows)
    n = math.ceil(field_rows / array_rows)
    return sorted({min(k * array_rows, top) for k in range(n)})


def column_offsets(field_cols: int, array_cols: int) -> list[int]:
    return list(range(max(0, field_cols - array_cols) + 1))


def _check_compatible(grid: FieldGrid, layout: ArrayLayout, report=None) -> None:
    if not math.isclose(grid.cell_pitch, layout.source_pitch, rel_tol=1e-12):
        raise ValidationError(
            f"cell pitch {grid.cell_pitch} differs from source pitch {layout.source_pitch}"
        )
    if report is not None and tuple(report.shape) != grid.shape:
        raise ValidationError(f"detection report shape {report.shape} does not cover grid {grid.shape}")


def _lane_start_x(layout: ArrayLayout) -> float:
    return -(layout.cols * layout.source_pitch + layout.camera_lead)


def _lane_end_x(grid: FieldGrid) -> float:
    return grid.cols * grid.cell_pitch


def _assign_lanes(weeds, lanes, array_rows):
    """Map each weed to the first lane whose band contains it."""
    by_lane = {lane: [] for lane in lanes}
    unreachable = []
    for r, c in weeds:
        for lane in lanes:
            if lane <= r < lane + array_rows:
                by_lane[lane].append((r, c))
                break
        else:
            unreachable.append((r, c))
    if unreachable:
        raise UnreachableCellError(unreachable)
    return by_lane


def footprint(layout: ArrayLayout, grid: FieldGrid, step: ActivationStep, lateral_offset: float = 0.0):
    """Yield ``(source, cell-or-None)`` for each active source of a step.

    Moving steps credit the cell under the source centre at mid-step.
    ``lateral_offset`` shifts the array sideways (positive = left of heading).
    """
    pose = step.array_pose
    advance = 0.5 * step.distance
    for k in sorted(step.active_set):
        dx, dy = layout.source_offset(k)
        x, y = pose.transform(dx + advance, dy + lateral_offset)
        yield k, cell_at(grid, WorldPose(x, y))


# ---------------------------------------------------------------- move then dwell


def _travel_step(x0, y0, x1, y1, speed):
    dist = abs(x1 - x0) + abs(y1 - y0)
    if dist <= 0:
        return None
    return ActivationStep(frozenset(), dist / speed, WorldPose(x0, y0), MOVING, speed)


def _assemble_dwell_plan(grid, layout, lanes, stops, dwell, transit_speed):
    """Build the step list from ``{(lane, offset): [weed cells]}``.

    Stops are visited lane by lane, left to right. Weeds at a stop are batched
    in row-major order into groups of at most ``layout.cap``.
    """
    pitch = layout.source_pitch
    steps = []
    x, y = _lane_start_x(layout), lanes[0] * pitch
    for lane in lanes:
        lane_y = lane * pitch
        if y != lane_y or x != _lane_start_x(layout):
            step = _travel_step(x, y, _lane_start_x(layout), lane_y, transit_speed)
            if step:
                steps.append(step)
            x, y = _lane_start_x(layout), lane_y
        for (s_lane, offset) in sorted(k for k in stops if k[0] == lane):
            cells = sorted(stops[(s_lane, offset)])
            if not cells:
                continue
            sx = offset * pitch
            step = _travel_step(x, y, sx, y, transit_speed)
            if step:
                steps.append(step)
            x = sx
            pose = WorldPose(sx, lane_y)
            for b in range(0, len(cells), layout.cap):
                batch = cells[b:b + layout.cap]
                active = frozenset((r - lane) * layout.cols + (c - offset) for r, c in batch)
                steps.append(ActivationStep(active, dwell, pose, DWELL))
        step = _travel_step(x, y, _lane_end_x(grid), y, transit_speed)
        if step:
            steps.append(step)
        x = _lane_end_x(grid)
    return ActivationPlan(tuple(steps), layout)


def plan_move_then_dwell(
    grid: FieldGrid,
    report,
    layout: ArrayLayout,
    target: float = 1.0,
    transit_speed: float = DEFAULT_TRANSIT_SPEED,
    lanes: Optional[Sequence[int]] = None,
) -> ActivationPlan:
    """Greedy stop-and-batch planner.

    Lanes are visited in order. A lane must serve the weeds no later lane
    covers; its next stop goes at the leftmost such weed's column (clamped
    to the field). Weeds in that first column have to be treated at this
    stop: they fill ``ceil(n / cap)`` batches, and spare slots go to the
    leftmost other weeds in the footprint. Anything else is deferred to a
    later stop or lane. At the last reachable offset every obligatory weed
    in the footprint is taken.
    """
    _check_compatible(grid, layout, report)
    if not transit_speed > 0:
        raise ValidationError(f"transit speed must be positive, got {transit_speed}")
    dwell = required_dwell(layout, target)
    lanes = sorted(set(lanes)) if lanes is not None else lane_offsets(grid.rows, layout.rows)
    weeds = report.reported_weeds()
    _assign_lanes(weeds, lanes, layout.rows)  # raises on unreachable cells
    last = max(0, grid.cols - layout.cols)
    cap = layout.cap

    def in_band(lane, w):
        return lane <= w[0] < lane + layout.rows

    pending = set(weeds)
    stops = {}
    for n, lane in enumerate(lanes):
        later = lanes[n + 1:]
        while True:
            must = sorted(
                (w for w in pending if in_band(lane, w) and not any(in_band(l2, w) for l2 in later)),
                key=lambda rc: (rc[1], rc[0]),
            )
            if not must:
                break
            offset = min(must[0][1], last)
            musts = set(must)
            window = [w for w in pending if in_band(lane, w) and offset <= w[1] < offset + layout.cols]
            if offset == last:
                mandatory = [w for w in window if w in musts]
            else:
                mandatory = [w for w in window if w in musts and w[1] == offset]
            taken = set(mandatory)
            optional = sorted(
                (w for w in window if w not in taken),
                key=lambda rc: (rc[1], rc not in musts, rc[0]),
            )
            room = math.ceil(len(mandatory) / cap) * cap - len(mandatory)
            chosen = mandatory + optional[:room]
            stops[(lane, offset)] = chosen
            pending.difference_update(chosen)
    return _assemble_dwell_plan(grid, layout, lanes, stops, dwell, transit_speed)


def brute_force_plan(
    grid: FieldGrid,
    report,
    layout: ArrayLayout,
    target: float = 1.0,
    transit_speed: float = DEFAULT_TRANSIT_SPEED,
    lanes: Optional[Sequence[int]] = None,
) -> ActivationPlan:
    """Exact minimum-time dwell plan by exhaustive enumeration (tests only).

    Every assignment of weeds to covering stop positions is enumerated,
    collapsed to per-position weed counts. Time is lane travel plus
    ``sum(ceil(count / cap))`` dwells; energy is the same for every
    complete plan, so ties fall to the lexicographically smallest step list.
    """
    _check_compatible(grid, layout, report)
    dwell = required_dwell(layout, target)
    lanes = sorted(set(lanes)) if lanes is not None else lane_offsets(grid.rows, layout.rows)
    positions = [(lane, o) for lane in lanes for o in column_offsets(grid.cols, layout.cols)]
    weeds = sorted(report.reported_weeds())
    if len(weeds) > BRUTE_FORCE_MAX_WEEDS or len(positions) > BRUTE_FORCE_MAX_POSITIONS:
        raise InstanceTooLargeError(
            f"brute force limited to {BRUTE_FORCE_MAX_WEEDS} weeds and {BRUTE_FORCE_MAX_POSITIONS} "
            f"positions, got {len(weeds)} and {len(positions)}"
        )
    options = []
    for r, c in weeds:
        cover = [
            p for p, (lane, o) in enumerate(positions)
            if lane <= r < lane + layout.rows and o <= c < o + layout.cols
        ]
        if not cover:
            raise UnreachableCellError([(r, c)])
        options.append(cover)

    # count vector -> lexicographically smallest assignment reaching it
    states = {tuple([0] * len(positions)): ()}
    for cover in options:
        nxt = {}
        for counts, assign in states.items():
            for p in cover:
                key = counts[:p] + (counts[p] + 1,) + counts[p + 1:]
                cand = assign + (p,)
                if key not in nxt or cand < nxt[key]:
                    nxt[key] = cand
        states = nxt

    cap = layout.cap
    best_batches = min(sum(-(-k // cap) for k in counts) for counts in states)
    best = None
    for counts, assign in states.items():
        if sum(-(-k // cap) for k in counts) != best_batches:
            continue
        stops = {}
        for w, p in zip(weeds, assign):
            stops.setdefault(positions[p], []).append(w)
        plan = _assemble_dwell_plan(grid, layout, lanes, stops, dwell, transit_speed)
        key = (plan.total_time, plan.total_energy, _plan_key(plan))
        if best is None or key < best[0]:
            best = (key, plan)
    return best[1]


def _plan_key(plan: ActivationPlan):
    return tuple(
        (s.array_pose.y, s.array_pose.x, s.mode, s.duration, tuple(sorted(s.active_set)))
        for s in plan.steps
    )


# ---------------------------------------------------------------- continuous motion


def plan_continuous(
    grid: FieldGrid,
    report,
    layout: ArrayLayout,
    speed: float,
    target: float = 1.0,
    transit_speed: Optional[float] = None,
    lanes: Optional[Sequence[int]] = None,
) -> ActivationPlan:
    """Plan for an array driving through each lane at constant ``speed``.

    Time is divided into slots of ``pitch / speed``; in slot ``k`` source
    column ``j`` passes over field column ``k - cols + 1 + j``. Each reported
    weed gets the source above it switched on until its dwell is met,
    earliest-leaving weeds first when the simultaneity cap binds. The plan
    never exceeds the cap; the verdict records whether every weed still
    reached its dwell and the first instant demand exceeded the cap.
    """
    _check_compatible(grid, layout, report)
    if not speed > 0:
        raise ValidationError(f"speed must be positive, got {speed}")
    transit_speed = transit_speed or speed
    dwell = required_dwell(layout, target)
    window = layout.exposure_window(speed)
    lanes = sorted(set(lanes)) if lanes is not None else lane_offsets(grid.rows, layout.rows)
    by_lane = _assign_lanes(report.reported_weeds(), lanes, layout.rows)

    pitch = layout.source_pitch
    tau = pitch / speed
    n_slots = grid.cols + layout.cols - 1
    done_tol = _FEASIBLE_RTOL * dwell
    remaining = {w: dwell for weeds in by_lane.values() for w in weeds}

    steps = []
    clock = 0.0
    bottleneck = None
    x, y = _lane_start_x(layout), lanes[0] * pitch

    def idle(x0, x1, y0):
        step = _travel_step(x0, y0, x1, y0, speed)
        if step:
            steps.append(step)

    for lane in lanes:
        lane_y = lane * pitch
        if y != lane_y or x != _lane_start_x(layout):
            step = _travel_step(x, y, _lane_start_x(layout), lane_y, transit_speed)
            if step:
                steps.append(step)
            x, y = _lane_start_x(layout), lane_y
        first_x = (-(layout.cols - 1) - 0.5) * pitch
        idle(x, first_x, y)
        clock = math.fsum(s.duration for s in steps)
        idle_from = None
        weeds = by_lane[lane]
        for k in range(n_slots):
            offset = k - (layout.cols - 1)
            slot_x = (offset - 0.5) * pitch
            under = [
                w for w in weeds
                if remaining[w] > done_tol and offset <= w[1] < offset + layout.cols
            ]
            under.sort(key=lambda rc: (rc[1], rc[0]))
            if len(under) > layout.cap and bottleneck is None:
                bottleneck = clock
            chosen = under[:layout.cap]
            if not chosen:
                if idle_from is None:
                    idle_from = slot_x
                clock += tau
                continue
            if idle_from is not None:
                idle(idle_from, slot_x, y)
                idle_from = None
            grant = {w: min(remaining[w], tau) for w in chosen}
            cuts = sorted({g for g in grant.values() if g < tau} | {tau})
            start = 0.0
            for cut in cuts:
                active = frozenset(
                    (r - lane) * layout.cols + (c - offset)
                    for (r, c), g in grant.items() if g > start
                )
                steps.append(ActivationStep(active, cut - start, WorldPose(slot_x + speed * start, y), MOVING, speed))
                start = cut
            for w, g in grant.items():
                remaining[w] -= g
            clock += tau
        end_x = (grid.cols - 0.5) * pitch
        if idle_from is not None:
            idle(idle_from, end_x, y)
        x = end_x

    underdosed = tuple(sorted(w for w, rem in remaining.items() if rem > done_tol))
    reasons = []
    if window < dwell * (1.0 - _FEASIBLE_RTOL):
        reasons.append(f"exposure window {window:.4g} s < required dwell {dwell:.4g} s")
    if underdosed:
        reasons.append(f"{len(underdosed)} weed cell(s) under-dosed")
    if bottleneck is not None:
        reasons.append(f"demand exceeded cap of {layout.cap} at t={bottleneck:.4g} s")
    verdict = Feasibility(
        feasible=not underdosed and window >= dwell * (1.0 - _FEASIBLE_RTOL),
        exposure_window=window,
        required_dwell=dwell,
        bottleneck_time=bottleneck,
        underdosed=underdosed,
        reason="; ".join(reasons),
    )
    return ActivationPlan(tuple(steps), layout, verdict)


def threshold_speed(layout: ArrayLayout, target: float = 1.0) -> float:
    """Fastest speed whose exposure window still covers the required dwell."""
    return layout.cols * layout.source_pitch / required_dwell(layout, target)


# ---------------------------------------------------------------- execution


def simulate_plan(
    grid: FieldGrid,
    plan: ActivationPlan,
    layout: Optional[ArrayLayout] = None,
    inplace: bool = False,
) -> FieldGrid:
    """Apply every step's dose to the cells beneath its active sources.

    Crop and soil cells are dosed like any other cell. Returns a new grid
    unless ``inplace`` is set.
    """
    layout = layout or plan.layout
    plan.validate(layout)
    out = grid if inplace else grid.copy()
    for step in plan.steps:
        for _, cell in footprint(layout, out, step):
            if cell is not None:
                out.expose(cell[0], cell[1], layout.recipe, step.duration)
    return out


def planned_doses(plan: ActivationPlan, grid: FieldGrid):
    """Exposure seconds per cell implied by a plan; ``{(r, c): seconds}``."""
    out = {}
    for step in plan.steps:
        for _, cell in footprint(plan.layout, grid, step):
            if cell is not None:
                out[cell] = out.get(cell, 0.0) + step.duration
    return out


def iter_step_boundaries(plan: ActivationPlan):
    """``(t_start, t_end, n_active)`` per step, in execution order."""
    t = 0.0
    for step in plan.steps:
        yield t, t + step.duration, len(step.active_set)
        t += step.duration


__all__ = [
    "ArrayLayout", "ActivationStep", "ActivationPlan", "Feasibility", "DWELL", "MOVING",
    "required_dwell", "plan_move_then_dwell", "plan_continuous", "brute_force_plan",
    "simulate_plan", "planned_doses", "footprint", "plan_to_csv", "plan_from_csv",
    "threshold_speed", "lane_offsets", "column_offsets", "iter_step_boundaries",
]
