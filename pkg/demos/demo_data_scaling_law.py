#!/usr/bin/env python3
"""Data scaling law with trapped-run exclusion and dataset planning.

Simulates a six-size training ensemble in which half the runs get stuck
at a high loss plateau, shows how badly they distort a naive log-log fit,
excludes them with the trapped detector, refits, and inverts the law to
plan the dataset size needed for a target loss. Writes the scatter+fit
SVG next to the script output directory.

Run: python demos/demo_data_scaling_law.py
"""

import dataclasses
from pathlib import Path

import numpy as np

from geoscale.scaling import FLOOR_FREE, FLOOR_ZERO, fit_power_law, mark_trapped, plan_dataset_size
from geoscale.simulator import simulate_ensemble
from geoscale.svgplot import scatter_fit_svg

TRUE_LAW = (0.02, 0.5, 0.03)  # floor, scale factor, exponent
SCALES = [5e3, 1e4, 2e4, 5e4, 1e5, 2e5, 5e5, 1e6]

print(f"ground truth: L(N) = {TRUE_LAW[0]} + {TRUE_LAW[1]} * N^-{TRUE_LAW[2]}")
print(f"simulating {len(SCALES)} dataset sizes, half trapped, noise sigma 0.01\n")

runs = simulate_ensemble(
    TRUE_LAW, SCALES, trapped_fraction=0.5, seeds=[1],
    total_steps=4000, noise_sigma=0.01, tau=4000 / 25,
)
for r in runs:
    tag = "TRAPPED" if r.point.trapped else "ok"
    print(f"  N = {r.point.scale:>9g}  converged loss {r.point.loss:.4f}  [{tag}]")

naive = fit_power_law([dataclasses.replace(r.point, trapped=False) for r in runs], floor=FLOOR_ZERO)
print(f"\nnaive fit over all eight points:      R^2 = {naive.r_squared:.3f}  (useless)")

points = mark_trapped([(r.point, r.log) for r in runs])
detected = [p.run_id for p in points if p.trapped]
print(f"trapped detector flags: {', '.join(detected)}")

fit = fit_power_law(points, floor=FLOOR_FREE)
print(f"fit after exclusion:                R^2 = {fit.r_squared:.4f}")
print(f"recovered law: A = {fit.A:.4f}, B = {fit.B:.4f}, exponent = {fit.exponent:.4f}")

target = float(fit.predict(5e6))  # plan a 5x extrapolation beyond the largest run
needed = plan_dataset_size(fit, target)
print(f"\nplanning: to reach loss {target:.4f} the law implies N = {needed:,.0f} images")
print(f"(largest simulated size was {SCALES[-1]:,.0f}; "
      f"true law would need N = {((target - TRUE_LAW[0]) / TRUE_LAW[1]) ** (-1 / TRUE_LAW[2]):,.0f})")

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)
used = [p for p in points if not p.trapped]
dropped = [p for p in points if p.trapped]
grid = np.geomspace(min(SCALES), max(SCALES) * 10, 200)
svg = scatter_fit_svg(
    [p.scale for p in used], [p.loss for p in used],
    grid, fit.predict(grid),
    excluded_x=[p.scale for p in dropped], excluded_y=[p.loss for p in dropped],
    title="converged loss vs dataset size (excluded runs hollow)",
    x_label="full-scene images", y_label="converged loss",
    log_x=True, log_y=True,
)
(out_dir / "data_scaling_law.svg").write_text(svg)
print(f"\nwrote {out_dir / 'data_scaling_law.svg'}")
