"""Confusion-matrix weed detector and the accuracy metrics used to score it."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .field import CellClass, FieldGrid

ROW_SUM_TOL = 1e-12
ALL_CLASSES = (CellClass.WEED, CellClass.CROP, CellClass.SOIL)


@dataclass(frozen=True, eq=False)
class ConfusionSpec:
    """Entry (i, j) is the probability that truth ``classes[i]`` is reported as ``classes[j]``."""

    classes: tuple
    matrix: np.ndarray

    def __post_init__(self):
        classes = tuple(CellClass.parse(c) for c in self.classes)
        if len(set(classes)) != len(classes) or not classes:
            raise ValidationError(f"classes must be a non-empty list without repeats, got {classes}")
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(classes), len(classes)):
            raise ValidationError(f"confusion matrix must be {len(classes)}x{len(classes)}, got {m.shape}")
        if np.any(~np.isfinite(m)) or np.any(m < 0) or np.any(m > 1):
            raise ValidationError("confusion matrix entries must lie in [0, 1]")
        sums = m.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise ValidationError(f"confusion row {classes[i].name} sums to {sums[i]!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "matrix", m)
        cum = np.cumsum(m, axis=1)
        cum[:, -1] = 1.0
        object.__setattr__(self, "_cum", cum)

    def __eq__(self, other):
        if not isinstance(other, ConfusionSpec):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.matrix, other.matrix)

    def index(self, cls) -> int:
        cls = CellClass.parse(cls)
        try:
            return self.classes.index(cls)
        except ValueError:
            raise ValidationError(f"class {cls.name} is not in the confusion spec") from None

    def weed_recall(self) -> float:
        i = self.index(CellClass.WEED)
        return float(self.matrix[i, i])

    def to_config(self) -> dict:
        return {
            "classes": [c.name.lower() for c in self.classes],
            "matrix": [[float(v) for v in row] for row in self.matrix],
        }

    @classmethod
    def from_config(cls, block) -> "ConfusionSpec":
        """Build from a preset name or a ``{classes, matrix}`` mapping."""
        if isinstance(block, str):
            return preset(block)
        if isinstance(block, dict):
            if "preset" in block:
                return preset(block["preset"])
            if "matrix" not in block:
                raise ValidationError("detector block needs 'preset' or 'matrix'")
            classes = block.get("classes", [c.name.lower() for c in ALL_CLASSES])
            return cls(tuple(classes), block["matrix"])
        raise ValidationError(f"detector must be a preset name or a mapping, got {type(block).__name__}")


def symmetric_spec(correct: float, classes: Sequence = ALL_CLASSES) -> ConfusionSpec:
    """Diagonal ``correct``; the remaining mass split evenly over the wrong classes."""
    n = len(classes)
    if n == 1:
        return ConfusionSpec(tuple(classes), [[1.0]])
    off = (1.0 - correct) / (n - 1)
    m = np.full((n, n), off)
    np.fill_diagonal(m, correct)
    return ConfusionSpec(tuple(classes), m)


PRESETS = {"perfect": 1.0, "paper-98": 0.98, "paper-95": 0.95}


def preset(name: str) -> ConfusionSpec:
    try:
        return symmetric_spec(PRESETS[name])
    except KeyError:
        raise ValidationError(
            f"unknown detector preset {name!r}; choose from {', '.join(PRESETS)}"
        ) from None


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def classify_cell(truth, spec: ConfusionSpec, rng) -> CellClass:
    i = spec.index(truth)
    u = _generator(rng).random()
    j = int(np.searchsorted(spec._cum[i], u, side="right"))
    return spec.classes[j]


@dataclass(frozen=True)
class ClassificationTally:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValidationError(f"tally count {name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ClassificationTally") -> "ClassificationTally":
        return ClassificationTally(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


def accuracy(t: ClassificationTally) -> float:
    if t.total <= 0:
        raise UndefinedMetricError("accuracy is undefined for an empty tally")
    return (t.tp + t.tn) / t.total


def mean_accuracy(runs: Sequence[float]) -> float:
    runs = list(runs)
    if not runs:
        raise UndefinedMetricError("mean accuracy needs at least one run")
    return sum(runs) / len(runs)


def tally_from(truth: np.ndarray, reported: np.ndarray) -> ClassificationTally:
    """Binary tally with Weed as the positive class."""
    t = np.asarray(truth) == CellClass.WEED
    p = np.asarray(reported) == CellClass.WEED
    return ClassificationTally(
        tp=int(np.count_nonzero(t & p)),
        tn=int(np.count_nonzero(~t & ~p)),
        fp=int(np.count_nonzero(~t & p)),
        fn=int(np.count_nonzero(t & ~p)),
    )


@dataclass(frozen=True, eq=False)
class DetectionReport:
    truth: np.ndarray
    reported: np.ndarray
    tally: ClassificationTally
    seed: Optional[int] = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.reported.shape

    def reported_weeds(self) -> list[tuple[int, int]]:
        rr, cc = np.nonzero(self.reported == CellClass.WEED)
        return [(int(r), int(c)) for r, c in zip(rr, cc)]

    def confusion_counts(self) -> np.ndarray:
        """3x3 counts indexed [truth, reported] in CellClass order."""
        counts = np.zeros((3, 3), dtype=int)
        np.add.at(counts, (self.truth.ravel().astype(int), self.reported.ravel().astype(int)), 1)
        return counts

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "truth", "reported"])
        rows, cols = self.reported.shape
        for r in range(rows):
            for c in range(cols):
                w.writerow([r, c, CellClass(int(self.truth[r, c])).code, CellClass(int(self.reported[r, c])).code])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, seed: Optional[int] = None) -> "DetectionReport":
        records = list(csv.DictReader(io.StringIO(text)))
        if not records:
            raise ValidationError("detection CSV has no rows")
        rows = 1 + max(int(rec["row"]) for rec in records)
        cols = 1 + max(int(rec["col"]) for rec in records)
        if len(records) != rows * cols:
            raise ValidationError("detection CSV does not cover a full grid")
        truth = np.zeros((rows, cols), dtype=np.int8)
        reported = np.zeros((rows, cols), dtype=np.int8)
        for rec in records:
            r, c = int(rec["row"]), int(rec["col"])
            truth[r, c] = CellClass.from_code(rec["truth"])
            reported[r, c] = CellClass.from_code(rec["reported"])
        return cls(truth, reported, tally_from(truth, reported), seed)


def survey_field(grid: FieldGrid, spec: ConfusionSpec, seed=None) -> DetectionReport:
    """Classify every cell independently, row-major, one uniform draw per cell.

    Consumes the generator exactly as ``grid.size`` successive
    :func:`classify_cell` calls would. Do not reuse the integer seed that
    built the field: both draw the same uniform stream, which correlates
    errors with truth.
    """
    rng = _generator(seed)
    truth = grid.truth
    present = np.unique(truth)
    lookup = np.full(3, -1)
    for v in present:
        lookup[int(v)] = spec.index(CellClass(int(v)))
    rows_idx = lookup[truth.ravel()]
    u = rng.random(truth.size)
    cum = spec._cum[rows_idx]
    j = (cum <= u[:, None]).sum(axis=1)
    class_codes = np.array([int(c) for c in spec.classes], dtype=np.int8)
    reported = class_codes[j].reshape(truth.shape)
    seed_value = seed if isinstance(seed, (int, np.integer)) else None
    return DetectionReport(truth.copy(), reported, tally_from(truth, reported), seed_value)


def report_from_labels(grid: FieldGrid, reported) -> DetectionReport:
    """Wrap a hand-made reported-class array (tests, replayed surveys)."""
    reported = np.asarray(reported, dtype=np.int8)
    if reported.shape != grid.shape:
        raise ValidationError(f"reported shape {reported.shape} does not match grid {grid.shape}")
    return DetectionReport(grid.truth.copy(), reported, tally_from(grid.truth, reported))


def perfect_report(grid: FieldGrid) -> DetectionReport:
    return report_from_labels(grid, grid.truth)


def expected_accuracy(spec: ConfusionSpec, class_weights: dict) -> float:
    """Matrix-implied weed-vs-rest accuracy for a given truth-class mix."""
    total = sum(class_weights.values())
    acc = 0.0
    w_idx = spec.classes.index(CellClass.WEED) if CellClass.WEED in spec.classes else None
    for cls, weight in class_weights.items():
        i = spec.index(cls)
        p_weed = spec.matrix[i, w_idx] if w_idx is not None else 0.0
        correct = p_weed if CellClass.parse(cls) == CellClass.WEED else 1.0 - p_weed
        acc += weight / total * correct
    return float(acc)
