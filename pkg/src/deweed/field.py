"""Treatment-cell grid: ground truth, per-cell dose ledgers and the field-map text format."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dose import DoseRecipe, ExposureLedger, lethality
from .errors import FieldMapError, ValidationError

DEFAULT_PITCH = 0.102  # m, one 4 x 4 in reflector


class CellClass(enum.IntEnum):
    WEED = 0
    CROP = 1
    SOIL = 2

    @property
    def code(self) -> str:
        return _CODES[self]

    @classmethod
    def from_code(cls, code: str) -> "CellClass":
        try:
            return _FROM_CODE[code]
        except KeyError:
            raise ValidationError(f"unknown cell code {code!r}; expected W, C or S") from None

    @classmethod
    def parse(cls, name) -> "CellClass":
        """Accept a CellClass, a one-letter code or a case-insensitive name."""
        if isinstance(name, CellClass):
            return name
        text = str(name).strip()
        if text in _FROM_CODE:
            return _FROM_CODE[text]
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValidationError(f"unknown cell class {name!r}") from None


_CODES = {CellClass.WEED: "W", CellClass.CROP: "C", CellClass.SOIL: "S"}
_FROM_CODE = {v: k for k, v in _CODES.items()}


@dataclass(frozen=True)
class WorldPose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        # normalise to [-pi, pi)
        h = (self.heading + math.pi) % (2.0 * math.pi) - math.pi
        object.__setattr__(self, "heading", h)

    def transform(self, dx: float, dy: float) -> tuple[float, float]:
        """World coordinates of a point given in the pose's local frame."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return self.x + c * dx - s * dy, self.y + s * dx + c * dy


@dataclass(frozen=True)
class Cell:
    index: tuple[int, int]
    truth: CellClass
    ledger: ExposureLedger
    treated_flag: bool


@dataclass
class FieldGrid:
    """Row-major grid of treatment cells.

    Column index grows along +x (the direction of travel), row index along +y.
    Cell (r, c) covers the half-open square [c*pitch, (c+1)*pitch) x [r*pitch, (r+1)*pitch).
    Dose state is held as dense arrays, one entry per cell.
    """

    rows: int
    cols: int
    cell_pitch: float
    truth: np.ndarray
    dose_near_ir: np.ndarray = field(default=None, repr=False)
    dose_uva: np.ndarray = field(default=None, repr=False)
    t_near_ir: np.ndarray = field(default=None, repr=False)
    t_uva: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise ValidationError(f"grid dimensions must be >= 1, got {self.rows} x {self.cols}")
        if not self.cell_pitch > 0:
            raise ValidationError(f"cell pitch must be positive, got {self.cell_pitch}")
        self.rows, self.cols = int(self.rows), int(self.cols)
        self.cell_pitch = float(self.cell_pitch)
        self.truth = np.asarray(self.truth, dtype=np.int8)
        if self.truth.shape != (self.rows, self.cols):
            raise ValidationError(
                f"truth array shape {self.truth.shape} does not match {self.rows} x {self.cols}"
            )
        for name in ("dose_near_ir", "dose_uva", "t_near_ir", "t_uva"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros((self.rows, self.cols)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def copy(self) -> "FieldGrid":
        return FieldGrid(
            self.rows,
            self.cols,
            self.cell_pitch,
            self.truth.copy(),
            self.dose_near_ir.copy(),
            self.dose_uva.copy(),
            self.t_near_ir.copy(),
            self.t_uva.copy(),
        )

    def reset_ledgers(self) -> None:
        for arr in (self.dose_near_ir, self.dose_uva, self.t_near_ir, self.t_uva):
            arr[...] = 0.0

    def ledger(self, row: int, col: int) -> ExposureLedger:
        return ExposureLedger(
            t_near_ir=float(self.t_near_ir[row, col]),
            t_uva=float(self.t_uva[row, col]),
            dose_integral_near_ir=float(self.dose_near_ir[row, col]),
            dose_integral_uva=float(self.dose_uva[row, col]),
        )

    def cell(self, row: int, col: int, recipe: DoseRecipe, target: float = 1.0) -> Cell:
        led = self.ledger(row, col)
        return Cell(
            index=(row, col),
            truth=CellClass(int(self.truth[row, col])),
            ledger=led,
            treated_flag=lethality(led, recipe) >= target,
        )

    def expose(self, row: int, col: int, recipe: DoseRecipe, dt: float) -> None:
        """Add ``dt`` seconds of the recipe's irradiance to one cell."""
        if dt < 0:
            raise ValidationError(f"exposure duration must be >= 0, got {dt}")
        self.dose_near_ir[row, col] += recipe.e_near_ir * dt
        self.dose_uva[row, col] += recipe.e_uva * dt
        if recipe.e_near_ir > 0:
            self.t_near_ir[row, col] += dt
        if recipe.e_uva > 0:
            self.t_uva[row, col] += dt

    def lethality_map(self, recipe: DoseRecipe) -> np.ndarray:
        raw = recipe.k_near_ir * self.dose_near_ir + recipe.k_uva * self.dose_uva
        return np.clip(raw, 0.0, 1.0)

    def cells_of(self, cls: CellClass) -> list[tuple[int, int]]:
        rr, cc = np.nonzero(self.truth == int(cls))
        return [(int(r), int(c)) for r, c in zip(rr, cc)]

    def count(self, cls: CellClass) -> int:
        return int(np.count_nonzero(self.truth == int(cls)))


def build_field(
    rows: int,
    cols: int,
    pitch: float = DEFAULT_PITCH,
    weed_fraction: float = 0.3,
    seed=None,
    crop_share: float = 0.5,
) -> FieldGrid:
    """Random field: each cell is a weed with probability ``weed_fraction``.

    Non-weed cells are crop with probability ``crop_share`` and soil otherwise.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValidationError(f"rows and cols must be integers >= 1, got {rows} x {cols}")
    if not 0.0 <= weed_fraction <= 1.0:
        raise ValidationError(f"weed_fraction must lie in [0, 1], got {weed_fraction}")
    if not 0.0 <= crop_share <= 1.0:
        raise ValidationError(f"crop_share must lie in [0, 1], got {crop_share}")
    if not pitch > 0:
        raise ValidationError(f"pitch must be positive, got {pitch}")
    rng = np.random.default_rng(seed)
    shape = (int(rows), int(cols))
    weed = rng.random(shape) < weed_fraction
    crop = rng.random(shape) < crop_share
    truth = np.where(weed, CellClass.WEED, np.where(crop, CellClass.CROP, CellClass.SOIL))
    return FieldGrid(shape[0], shape[1], pitch, truth.astype(np.int8))


def cell_at(grid: FieldGrid, pose: WorldPose) -> Optional[tuple[int, int]]:
    col = math.floor(pose.x / grid.cell_pitch)
    row = math.floor(pose.y / grid.cell_pitch)
    if 0 <= row < grid.rows and 0 <= col < grid.cols:
        return row, col
    return None


def load_field(document: str) -> FieldGrid:
    """Parse a field map.

    The first non-comment line is ``rows cols pitch_m``; each following
    non-comment line holds one grid row of space-separated W/C/S codes.
    """
    lines = []
    for lineno, raw in enumerate(document.splitlines(), start=1):
        text = raw.split("#", 1)[0]
        if text.strip():
            lines.append((lineno, raw, text))
    if not lines:
        raise FieldMapError("empty field map", line=1)

    lineno, raw, text = lines[0]
    parts = text.split()
    if len(parts) != 3:
        raise FieldMapError(
            f"header must be 'rows cols pitch_m', got {len(parts)} field(s)", lineno, _col(raw, parts[0])
        )
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise FieldMapError("rows and cols must be integers", lineno, _col(raw, parts[0])) from None
    try:
        pitch = float(parts[2])
    except ValueError:
        raise FieldMapError("pitch must be a number", lineno, _col(raw, parts[2])) from None
    if rows < 1 or cols < 1 or not pitch > 0:
        raise ValidationError(f"invalid header dimensions: {rows} x {cols} at pitch {pitch}")

    body = lines[1:]
    if len(body) != rows:
        where = body[-1][0] + 1 if body else lineno + 1
        raise FieldMapError(f"expected {rows} grid row(s), found {len(body)}", where)
    truth = np.zeros((rows, cols), dtype=np.int8)
    for r, (lineno, raw, text) in enumerate(body):
        codes = text.split()
        if len(codes) != cols:
            raise FieldMapError(f"expected {cols} cell code(s), found {len(codes)}", lineno)
        pos = 0
        for c, code in enumerate(codes):
            pos = raw.index(code, pos)
            if code not in _FROM_CODE:
                raise FieldMapError(f"unknown cell code {code!r}; expected W, C or S", lineno, pos + 1)
            truth[r, c] = _FROM_CODE[code]
            pos += len(code)
    return FieldGrid(rows, cols, pitch, truth)


def _col(raw: str, token: str) -> int:
    return raw.find(token) + 1


def save_field(grid: FieldGrid) -> str:
    out = [f"{grid.rows} {grid.cols} {grid.cell_pitch!r}"]
    for r in range(grid.rows):
        out.append(" ".join(CellClass(int(v)).code for v in grid.truth[r]))
    return "\n".join(out) + "\n"
