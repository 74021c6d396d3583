import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deweed.errors import FieldMapError, ValidationError
from deweed.field import CellClass, FieldGrid, WorldPose, build_field, cell_at, load_field, save_field


def test_build_field_fraction_zero_and_one():
    g0 = build_field(1, 5, 0.102, 0.0, seed=3)
    assert g0.size == 5 and g0.count(CellClass.WEED) == 0
    g1 = build_field(1, 5, 0.102, 1.0, seed=3)
    assert g1.count(CellClass.WEED) == 5


def test_build_field_da_footprint_expectation():
    counts = [build_field(7, 15, 0.102, 0.3, seed=s).count(CellClass.WEED) for s in range(400)]
    assert all(build_field(7, 15, 0.102, 0.3, seed=0).size == 105 for _ in range(1))
    mean = np.mean(counts)
    se = math.sqrt(105 * 0.3 * 0.7 / len(counts))
    assert abs(mean - 31.5) < 3 * se


def test_build_field_is_reproducible():
    a = build_field(9, 11, 0.102, 0.4, seed=42)
    b = build_field(9, 11, 0.102, 0.4, seed=42)
    assert np.array_equal(a.truth, b.truth)
    assert not np.array_equal(a.truth, build_field(9, 11, 0.102, 0.4, seed=43).truth)


def test_build_field_ledgers_zeroed():
    g = build_field(3, 4, seed=1)
    assert g.dose_uva.sum() == 0 and g.t_near_ir.sum() == 0


@pytest.mark.parametrize(
    "args",
    [(0, 5, 0.102, 0.3), (1, 0, 0.102, 0.3), (1, 5, 0.0, 0.3), (1, 5, 0.102, -0.1), (1, 5, 0.102, 1.5)],
)
def test_build_field_rejects_bad_input(args):
    with pytest.raises(ValidationError):
        build_field(*args, seed=0)


def test_crop_soil_split_roughly_even():
    g = build_field(100, 100, weed_fraction=0.0, seed=5)
    crop = g.count(CellClass.CROP) / g.size
    assert abs(crop - 0.5) < 0.02


def test_load_field_transcribes():
    g = load_field("1 5 0.102\nW C S W W\n")
    assert g.shape == (1, 5)
    assert g.cells_of(CellClass.WEED) == [(0, 0), (0, 3), (0, 4)]
    assert CellClass(int(g.truth[0, 1])) == CellClass.CROP


def test_load_field_comments_and_roundtrip():
    doc = "# test plot\n2 3 0.102  # header\nW C S\n# middle\nS S W\n"
    g = load_field(doc)
    canonical = save_field(g)
    assert canonical == "2 3 0.102\nW C S\nS S W\n"
    assert save_field(load_field(canonical)) == canonical


def test_load_field_empty_is_parse_error():
    with pytest.raises(FieldMapError):
        load_field("")
    with pytest.raises(FieldMapError):
        load_field("# only a comment\n")


def test_load_field_names_line_and_column():
    with pytest.raises(FieldMapError) as err:
        load_field("1 3 0.102\nW X S\n")
    assert err.value.line == 2 and err.value.column == 3


@pytest.mark.parametrize(
    "doc",
    ["2 3 0.102\nW C S\n", "1 3 0.102\nW C\n", "1 3 abc\nW C S\n", "1 3\nW C S\n"],
)
def test_load_field_inconsistent(doc):
    with pytest.raises(ValidationError):
        load_field(doc)


def test_cell_at_examples():
    g = build_field(3, 3, 0.102, 0.0, seed=0)
    assert cell_at(g, WorldPose(0.051, 0.051)) == (0, 0)
    assert cell_at(g, WorldPose(0.102, 0.0)) == (0, 1)
    assert cell_at(g, WorldPose(-0.01, 0.0)) is None
    assert cell_at(g, WorldPose(0.306, 0.0)) is None


@given(
    x=st.floats(min_value=0.0, max_value=0.102 * 15, exclude_max=True),
    y=st.floats(min_value=0.0, max_value=0.102 * 7, exclude_max=True),
)
@settings(max_examples=300)
def test_cell_at_tiles_field(x, y):
    g = FieldGrid(7, 15, 0.102, np.zeros((7, 15)))
    cell = cell_at(g, WorldPose(x, y))
    assert cell is not None
    r, c = cell
    p = g.cell_pitch
    assert c * p <= x < (c + 1) * p or math.isclose(x, (c + 1) * p)
    assert r * p <= y < (r + 1) * p or math.isclose(y, (r + 1) * p)


@given(st.floats(min_value=-50, max_value=50))
def test_pose_heading_normalised(h):
    pose = WorldPose(0, 0, h)
    assert -math.pi <= pose.heading < math.pi
    assert math.isclose(math.cos(pose.heading), math.cos(h), abs_tol=1e-9)
