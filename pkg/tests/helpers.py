"""Instance generators shared by the planner tests and the acceptance suite."""

import numpy as np

from deweed.detect import report_from_labels
from deweed.field import CellClass, FieldGrid
from deweed.sched import ArrayLayout, column_offsets, lane_offsets


def grid_with_weeds(rows, cols, weeds, pitch=0.102, background=CellClass.CROP):
    truth = np.full((rows, cols), int(background), dtype=np.int8)
    for r, c in weeds:
        truth[r, c] = int(CellClass.WEED)
    return FieldGrid(rows, cols, pitch, truth)


def layout_with_cap(rows, cols, cap, **kw):
    return ArrayLayout(rows=rows, cols=cols, per_source_power=400.0, power_budget=400.0 * cap, **kw)


def random_small_instance(rng, max_weeds=12, max_positions=6):
    """Random field/layout whose exhaustive search is within the oracle's guard."""
    while True:
        ar = int(rng.integers(1, 4))
        ac = int(rng.integers(1, 6))
        fr = int(rng.integers(1, 3 * ar + 1))
        fc = int(rng.integers(1, ac + 6))
        n_pos = len(lane_offsets(fr, ar)) * len(column_offsets(fc, ac))
        if n_pos <= max_positions:
            break
    cap = int(rng.choice([1, 2, 3, 4, 5]))
    k = int(rng.integers(0, min(max_weeds, fr * fc) + 1))
    flat = rng.choice(fr * fc, size=k, replace=False)
    weeds = [(int(i) // fc, int(i) % fc) for i in flat]
    grid = grid_with_weeds(fr, fc, weeds)
    return grid, report_from_labels(grid, grid.truth), layout_with_cap(ar, ac, cap)
