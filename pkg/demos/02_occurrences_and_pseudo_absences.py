"""Occurrence preparation: cleaning, thinning, balanced pseudo-absences.

Presence-only records are cleaned against the environmental layers,
optionally thinned by coordinate rounding, then matched one-to-one with
pseudo-absences drawn uniformly from the remaining valid cells of each
timestamp.
"""
from dataclasses import replace

from bartsdm.datasets import sample_toy_occurrences, toy_environment
from bartsdm.occurrences import (
    OccurrenceRecord,
    build_model_matrix,
    clean_occurrences,
    generate_pseudo_absences,
    thin_occurrences,
    valid_cell_masks,
)

fitting, _ = toy_environment(seed=3)
raw = [
    OccurrenceRecord(lon=lon, lat=lat, timestamp=t)
    for lon, lat, t in sample_toy_occurrences(fitting, seed=4)
]
# sprinkle in records the cleaner must remove
raw += [raw[0], OccurrenceRecord(lon=float("nan"), lat=1.0, timestamp=2000),
        OccurrenceRecord(lon=0.5, lat=9.5, timestamp=2000),   # on the land block
        OccurrenceRecord(lon=5.0, lat=5.0, timestamp=1850)]   # no matching layers

records, report = clean_occurrences(raw, fitting)
print("cleaning report:")
for reason, count in report.as_rows():
    print(f"  {reason:22s} {count}")

thinned = thin_occurrences(records, decimals=0, seed=1)
print(f"thinning to 1-degree bins: {len(records)} -> {len(thinned)} records")

presences = [replace(r, label=1) for r in thinned]
masks = valid_cell_masks(fitting)
absences = generate_pseudo_absences(presences, masks, seed=2)
per_t = {}
for rec in presences + absences:
    key = (rec.timestamp, "presence" if rec.label == 1 else "absence")
    per_t[key] = per_t.get(key, 0) + 1
for (t, kind), count in sorted(per_t.items()):
    print(f"  t={t}: {kind:8s} {count}")

matrix = build_model_matrix(presences + absences, fitting, include_coords=False, standardize=True)
print(f"model matrix: {matrix.n_rows} rows x {len(matrix.columns)} covariates {matrix.columns}")
print(f"standardization: {matrix.standardization.mean}")
