#!/usr/bin/env python3
"""Chip-aligned weak labels from tagged vector features.

Runs the full geometry pipeline on one 48x48 chip: ontology filtering,
world-to-pixel transform, clipping, rasterization, rotated boxes, and
semantic-mask composition with rule precedence. Prints the semantic mask
as ASCII art and writes the PGM/CSV/RLE artifacts.

Run: python demos/demo_weak_labels.py
"""

from pathlib import Path

import numpy as np

from geoscale.labelgen import (
    BACKGROUND,
    ChipSpec,
    ClassMap,
    ClassRule,
    Feature,
    GeoTransform,
    Geometry,
    chip_footprint,
    generate_labels,
    write_bundle,
)

chip = ChipSpec(
    image_id="demo_chip",
    transform=GeoTransform(origin_x=500_000.0, origin_y=4_100_000.0,
                           pixel_width=0.5, pixel_height=-0.5),
    width=48, height=48, crs="EPSG:32633",
)
corners = chip_footprint(chip)
print("chip footprint in world coordinates (CCW):")
for x, y in corners:
    print(f"  ({x:,.1f}, {y:,.1f})")


def world(px, py):
    return (500_000.0 + px * 0.5, 4_100_000.0 - py * 0.5)


def world_poly(pixel_pts):
    return np.array([world(px, py) for px, py in pixel_pts])


classmap = ClassMap(
    rules=(
        ClassRule("building", "*", 1),
        ClassRule("highway", "*", 0),
        ClassRule("natural", "water", 2),
    ),
    class_names=("road", "building", "water"),
)

features = [
    Feature({"building": "yes"}, Geometry("polygon", world_poly(
        [(8, 8), (22, 8), (22, 20), (8, 20)]))),
    Feature({"building": "apartments"}, Geometry("polygon", world_poly(
        [(30, 26), (44, 22), (46, 34), (32, 38)]))),   # rotated block
    Feature({"highway": "residential"}, Geometry("line", world_poly(
        [(0, 44), (47, 10)]))),
    Feature({"natural": "water"}, Geometry("polygon", world_poly(
        [(2, 30), (14, 28), (16, 44), (0, 46)]))),
    Feature({"natural": "tree"}, Geometry("point", world_poly([(40, 6)]))),  # no rule: dropped
]

bundle = generate_labels(chip, features, classmap, buffer_radius_px=1.5)
print(f"\n{len(bundle.instances)} instances labeled "
      f"({len(features)} features, unmatched ones dropped):")
for k, inst in enumerate(bundle.instances):
    b = inst.box
    print(f"  #{k} class {classmap.class_names[inst.class_id]:9s} "
          f"{int(inst.mask.sum()):4d} px  box {b.w:5.1f} x {b.h:5.1f} @ {b.theta_deg:6.1f} deg")

glyphs = {BACKGROUND: ".", 0: "#", 1: "B", 2: "~"}
print("\nsemantic mask (rule precedence resolves overlaps):")
for row in bundle.semantic_mask:
    print("  " + "".join(glyphs[v] for v in row))

out = write_bundle(bundle, Path("demo_out"))
print(f"\nwrote {out}/semantic.pgm, instance_*.pgm, boxes.csv, masks.json")
