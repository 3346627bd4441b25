"""Raster layers: ASCII grid I/O, polygon masking, standardization, averaging.

Walks the layer-processing toolkit on a generated two-variable world:
write/read round trips, masking to a study polygon, z-scoring, and the
temporal average used for the single general prediction.
"""
import tempfile
from pathlib import Path

import numpy as np

from bartsdm.datasets import toy_environment
from bartsdm.grids import (
    StudyArea,
    average_stack,
    crop_mask,
    load_ascii_grid,
    write_ascii_grid,
    zscore_standardize,
)

out = Path(tempfile.mkdtemp(prefix="bartsdm_demo_"))
fitting, scenarios = toy_environment(seed=7)
stack = fitting.steps[2000]

print(f"grid: {stack.grid.n_rows}x{stack.grid.n_cols} cells of {stack.grid.cell_size} deg")
print(f"variables: {stack.variables}")

# 1. ASCII grid round trip
path = out / "temp_2000.asc"
write_ascii_grid(stack["temp"], path)
back = load_ascii_grid(path)
keep = ~back.missing
print(f"round trip exact: {np.array_equal(back.values[keep], stack['temp'].values[keep])}")

# 2. Mask to a study polygon (cell-center rule; extent unchanged)
area = StudyArea((((2.0, 2.0), (9.0, 2.0), (9.0, 9.0), (2.0, 9.0), (2.0, 2.0)),))
masked = crop_mask(stack, area)
print(f"cells masked out: {int(masked['temp'].missing.sum() - stack['temp'].missing.sum())}")

# 3. Z-score standardization with reusable parameters
standardized, params = zscore_standardize(stack)
for var in standardized.variables:
    vals = standardized[var].values[~standardized[var].missing]
    print(f"{var}: mean={vals.mean():+.2e} sd={vals.std(ddof=1):.6f} "
          f"(original mean {params.mean[var]:.2f}, sd {params.sd[var]:.2f})")

# 4. Temporal average across the fitting period
averaged = average_stack(fitting)
t2000 = stack["temp"].values[5, 5]
mean_55 = averaged["temp"].values[5, 5]
print(f"temp at cell (5,5): 2000 value {t2000:.2f}, 2000-2010 mean {mean_55:.2f}")
print(f"outputs in {out}")
