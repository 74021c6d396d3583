"""Scenario documents (YAML) and their validation.

A scenario has one section per component::

    field:    {rows, cols, pitch, weed_fraction, crop_share, map}
    recipe:   {preset, label, e_near_ir_w_m2, e_uva_w_m2, k_near_ir, k_uva}
    layout:   {rows, cols, source_pitch, per_source_power, power_budget,
               max_simultaneous, honor_paper_16, source_height, camera_lead}
    robot:    {transit_speed, wiggle_sigma, course_correction, speed}
    detector: preset name, or {preset} or {classes, matrix}
    mission:  {target, mode, seed, seeds, collateral_threshold}
    output_dir: path

Every key is optional; omitted keys take the Phase I distributed-array
defaults. Speeds are m/s, lengths metres, irradiances W/m^2.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .detect import ConfusionSpec
from .dose import RECIPE_PRESETS, DoseRecipe
from .errors import ValidationError
from .field import FieldGrid, build_field, load_field
from .sched import ArrayLayout, required_dwell, threshold_speed
from .sim import (
    DEFAULT_COLLATERAL_THRESHOLD,
    MODES,
    MissionResult,
    RobotConfig,
    execute_mission,
)

OUTPUT_DIR_ENV = "DEWEED_OUTPUT_DIR"

SECTIONS = {
    "field": {"rows", "cols", "pitch", "weed_fraction", "crop_share", "map"},
    "recipe": {"preset", "label", "e_near_ir_w_m2", "e_uva_w_m2", "k_near_ir", "k_uva"},
    "layout": {
        "rows", "cols", "source_pitch", "per_source_power", "power_budget",
        "max_simultaneous", "honor_paper_16", "source_height", "camera_lead",
    },
    "robot": {"transit_speed", "wiggle_sigma", "course_correction", "speed"},
    "mission": {"target", "mode", "seed", "seeds", "collateral_threshold"},
}
TOP_LEVEL = set(SECTIONS) | {"detector", "output_dir"}

SWEEP_AXES = {
    "speed": "robot.speed",
    "wiggle_sigma": "robot.wiggle_sigma",
    "detector": "detector",
    "target": "mission.target",
    "cap": "layout.max_simultaneous",
}


class ScenarioError(ValidationError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class Scenario:
    recipe: DoseRecipe
    layout: ArrayLayout
    robot: RobotConfig
    detector: ConfusionSpec
    field_spec: dict
    target: float = 1.0
    mode: str = "dwell"
    seed: int = 0
    seeds: int = 30
    collateral_threshold: float = DEFAULT_COLLATERAL_THRESHOLD
    output_dir: Path = Path("out")
    raw: dict = field(default_factory=dict, repr=False)
    base_dir: Path = Path(".")

    def field_for(self, seed) -> FieldGrid:
        spec = self.field_spec
        if spec.get("map"):
            path = Path(spec["map"])
            if not path.is_absolute():
                path = self.base_dir / path
            return load_field(path.read_text())
        return build_field(
            spec["rows"], spec["cols"], spec["pitch"], spec["weed_fraction"], seed, spec["crop_share"]
        )

    def run(self, seed: Optional[int] = None) -> MissionResult:
        seed = self.seed if seed is None else seed
        grid = self.field_for(seed)
        return execute_mission(
            grid, self.layout, self.robot, self.detector, self.target, self.mode, seed, self.collateral_threshold
        )

    def derived(self) -> dict:
        """Quantities worth printing before a run."""
        out = {
            "effective_cap": self.layout.cap,
            "peak_power_w": self.layout.cap * self.layout.per_source_power,
            "power_budget_w": self.layout.power_budget,
            "honor_paper_16": self.layout.honor_paper_16,
            "dose_rate_per_s": self.recipe.dose_rate,
        }
        try:
            out["required_dwell_s"] = required_dwell(self.layout, self.target)
            out["threshold_speed_m_s"] = threshold_speed(self.layout, self.target)
        except ValidationError as exc:
            out["required_dwell_s"] = f"unreachable ({exc})"
        out["exposure_window_s"] = self.layout.exposure_window(self.robot.speed)
        return out


def _check_keys(section: str, block, allowed):
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ScenarioError(section, f"expected a mapping, got {type(block).__name__}")
    for key in block:
        if key not in allowed:
            raise ScenarioError(f"{section}.{key}", f"unknown key; allowed: {', '.join(sorted(allowed))}")
    return block


def _build(key, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ScenarioError:
        raise
    except ValidationError as exc:
        raise ScenarioError(key, str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(key, str(exc)) from None


def _number(section: str, block: dict, key: str, default, kind=float):
    value = block.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{section}.{key}", f"expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ScenarioError(f"{section}.{key}", f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _flag(section: str, block: dict, key: str, default: bool) -> bool:
    value = block.get(key, default)
    if not isinstance(value, bool):
        raise ScenarioError(f"{section}.{key}", f"expected true or false, got {value!r}")
    return value


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ValidationError(f"override {item!r} must look like key=value")
    key, text = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ValidationError(f"override {item!r} has an empty key")
    return key, yaml.safe_load(text) if text.strip() else ""


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for key, value in overrides:
        parts = key.split(".")
        if parts[0] not in TOP_LEVEL:
            raise ScenarioError(key, f"unknown section; allowed: {', '.join(sorted(TOP_LEVEL))}")
        node = doc
        for p in parts[:-1]:
            child = node.get(p)
            if not isinstance(child, dict):
                child = {}
                node[p] = child
            node = child
        node[parts[-1]] = value
    return doc


def scenario_from_dict(doc: dict, base_dir: Path = Path(".")) -> Scenario:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a mapping of sections")
    for key in doc:
        if key not in TOP_LEVEL:
            raise ScenarioError(key, f"unknown section; allowed: {', '.join(sorted(TOP_LEVEL))}")

    rb = _check_keys("recipe", doc.get("recipe"), SECTIONS["recipe"])
    preset_name = rb.get("preset", "phase1")
    if preset_name not in RECIPE_PRESETS:
        raise ScenarioError("recipe.preset", f"unknown preset {preset_name!r}; choose from {', '.join(RECIPE_PRESETS)}")
    base = RECIPE_PRESETS[preset_name]()
    recipe = _build(
        "recipe",
        DoseRecipe,
        e_near_ir=_number("recipe", rb, "e_near_ir_w_m2", base.e_near_ir),
        e_uva=_number("recipe", rb, "e_uva_w_m2", base.e_uva),
        k_near_ir=_number("recipe", rb, "k_near_ir", base.k_near_ir),
        k_uva=_number("recipe", rb, "k_uva", base.k_uva),
        label=str(rb.get("label", base.label)),
    )

    lb = _check_keys("layout", doc.get("layout"), SECTIONS["layout"])
    d = ArrayLayout()
    layout = _build(
        "layout",
        ArrayLayout,
        rows=_number("layout", lb, "rows", d.rows, int),
        cols=_number("layout", lb, "cols", d.cols, int),
        source_pitch=_number("layout", lb, "source_pitch", d.source_pitch),
        per_source_power=_number("layout", lb, "per_source_power", d.per_source_power),
        power_budget=_number("layout", lb, "power_budget", d.power_budget),
        max_simultaneous=_number("layout", lb, "max_simultaneous", None, int),
        honor_paper_16=_flag("layout", lb, "honor_paper_16", False),
        recipe=recipe,
        source_height=_number("layout", lb, "source_height", d.source_height),
        camera_lead=_number("layout", lb, "camera_lead", d.camera_lead),
    )

    robb = _check_keys("robot", doc.get("robot"), SECTIONS["robot"])
    r = RobotConfig()
    robot = _build(
        "robot",
        RobotConfig,
        transit_speed=_number("robot", robb, "transit_speed", r.transit_speed),
        wiggle_sigma=_number("robot", robb, "wiggle_sigma", r.wiggle_sigma),
        course_correction=_flag("robot", robb, "course_correction", False),
        speed=_number("robot", robb, "speed", r.speed),
    )

    detector = _build("detector", ConfusionSpec.from_config, doc.get("detector", "perfect"))

    fb = _check_keys("field", doc.get("field"), SECTIONS["field"])
    field_spec = {
        "rows": _number("field", fb, "rows", layout.rows, int),
        "cols": _number("field", fb, "cols", layout.cols, int),
        "pitch": _number("field", fb, "pitch", layout.source_pitch),
        "weed_fraction": _number("field", fb, "weed_fraction", 0.3),
        "crop_share": _number("field", fb, "crop_share", 0.5),
        "map": fb.get("map"),
    }
    if field_spec["map"] is not None:
        path = Path(field_spec["map"])
        if not path.is_absolute():
            path = base_dir / path
        try:
            grid = load_field(path.read_text())
        except OSError as exc:
            raise ScenarioError("field.map", f"cannot read {path}: {exc.strerror}") from None
        except ValidationError as exc:
            raise ScenarioError("field.map", str(exc)) from None
        field_spec.update(rows=grid.rows, cols=grid.cols, pitch=grid.cell_pitch)
    else:
        # dry-run generation validates dimensions and fractions
        _build("field", build_field, field_spec["rows"], field_spec["cols"], field_spec["pitch"],
               field_spec["weed_fraction"], 0, field_spec["crop_share"])
    if abs(field_spec["pitch"] - layout.source_pitch) > 1e-12 * layout.source_pitch:
        raise ScenarioError(
            "field.pitch", f"cell pitch {field_spec['pitch']} must equal layout.source_pitch {layout.source_pitch}"
        )

    mb = _check_keys("mission", doc.get("mission"), SECTIONS["mission"])
    target = _number("mission", mb, "target", 1.0)
    if not 0.0 < target <= 1.0:
        raise ScenarioError("mission.target", f"must lie in (0, 1], got {target}")
    mode = mb.get("mode", "dwell")
    if mode not in MODES:
        raise ScenarioError("mission.mode", f"must be one of {', '.join(MODES)}, got {mode!r}")
    seeds = _number("mission", mb, "seeds", 30, int)
    if seeds < 1:
        raise ScenarioError("mission.seeds", f"must be >= 1, got {seeds}")
    collateral = _number("mission", mb, "collateral_threshold", DEFAULT_COLLATERAL_THRESHOLD)
    if not 0.0 <= collateral <= 1.0:
        raise ScenarioError("mission.collateral_threshold", f"must lie in [0, 1], got {collateral}")
    if not recipe.usable:
        raise ScenarioError("recipe", "both bands have zero dose rate; no target is reachable")

    return Scenario(
        recipe=recipe,
        layout=layout,
        robot=robot,
        detector=detector,
        field_spec=field_spec,
        target=target,
        mode=mode,
        seed=_number("mission", mb, "seed", 0, int),
        seeds=seeds,
        collateral_threshold=collateral,
        output_dir=Path(os.environ.get(OUTPUT_DIR_ENV) or doc.get("output_dir") or "out"),
        raw=doc,
        base_dir=base_dir,
    )


def read_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML: {exc}") from None
    return doc if doc is not None else {}


def load_scenario(path, overrides=()) -> Scenario:
    path = Path(path)
    doc = apply_overrides(read_document(path), overrides)
    return scenario_from_dict(doc, base_dir=path.parent)


def with_axis_value(scenario: Scenario, axis: str, value) -> Scenario:
    if axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {axis!r}; sweepable axes: {', '.join(SWEEP_AXES)}")
    doc = apply_overrides(scenario.raw, [(SWEEP_AXES[axis], value)])
    return scenario_from_dict(doc, base_dir=scenario.base_dir)

