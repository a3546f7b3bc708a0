import json
import math

import numpy as np
import pytest

from geoscale.errors import GeoscaleError
from geoscale.labelgen import (
    BACKGROUND,
    ChipSpec,
    ClassMap,
    ClassRule,
    Feature,
    GeoTransform,
    Geometry,
    box_corners,
    chip_footprint,
    clip_to_chip,
    convex_hull,
    filter_ontology,
    generate_labels,
    is_simple_polygon,
    pixel_to_world,
    polygon_area,
    rasterize_mask,
    read_chips,
    read_geojson,
    read_pgm,
    rle_decode,
    rle_encode,
    rotated_bbox,
    world_to_pixel,
    write_bundle,
)

from conftest import random_convex_polygon, random_star_polygon
from oracles import min_rect_area_sweep, rasterize_by_point_test

IDENTITY = GeoTransform(0.0, 0.0, 1.0, 1.0)


def chip(transform=IDENTITY, **over):
    params = dict(image_id="chip0", transform=transform, width=1024, height=1024)
    params.update(over)
    return ChipSpec(**params)


def cyclic_equal(a, b, tol=1e-12):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    for shift in range(len(a)):
        if np.allclose(np.roll(a, shift, axis=0), b, atol=tol):
            return True
    return False


# --- footprint and transforms -------------------------------------------


def test_footprint_identity():
    fp = chip_footprint(chip())
    assert cyclic_equal(fp, [[0, 0], [1024, 0], [1024, 1024], [0, 1024]])


def test_footprint_affine_example():
    t = GeoTransform(100.0, 500.0, 0.5, -0.5)
    fp = chip_footprint(chip(transform=t))
    assert {tuple(p) for p in fp} == {(100.0, 500.0), (612.0, 500.0), (612.0, -12.0), (100.0, -12.0)}
    # CCW in world coordinates
    x, y = fp[:, 0], fp[:, 1]
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_footprint_offset_translates():
    base = chip_footprint(chip())
    moved = chip_footprint(chip(col_off=1024, row_off=2048))
    assert np.allclose(moved, base + np.array([1024.0, 2048.0]))


def test_footprint_rejects_rotation():
    t = GeoTransform(0.0, 0.0, 1.0, 1.0, row_rotation=0.1)
    with pytest.raises(GeoscaleError, match="rotated"):
        chip_footprint(chip(transform=t))


def test_world_to_pixel_identity():
    poly = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(world_to_pixel(poly, chip()), poly)


def test_world_to_pixel_scale():
    c = chip(transform=GeoTransform(0.0, 0.0, 0.5, 0.5))
    seg = np.array([[0.0, 0.0], [1.0, 0.0]])
    out = world_to_pixel(seg, c)
    assert np.hypot(*(out[1] - out[0])) == pytest.approx(2.0)  # world lengths double in pixels


def test_pixel_world_round_trip():
    rng = np.random.default_rng(0)
    c = chip(transform=GeoTransform(120.5, -42.25, 0.31, -0.62), col_off=100, row_off=50)
    for _ in range(20):
        poly = rng.uniform(-500, 500, size=(12, 2))
        back = world_to_pixel(pixel_to_world(poly, c), c)
        assert np.allclose(back, poly, atol=1e-9)


# --- clipping ------------------------------------------------------------


def test_clip_inside_unchanged():
    poly = np.array([[10.0, 10.0], [50.0, 12.0], [40.0, 60.0]])
    out = clip_to_chip(poly, 100, 100)
    assert cyclic_equal(out, poly)


def test_clip_outside_empty():
    poly = np.array([[200.0, 200.0], [250.0, 200.0], [225.0, 260.0]])
    assert clip_to_chip(poly, 100, 100).shape == (0, 2)


def test_clip_half_straddle_area():
    # unit square straddling the right edge half-way
    poly = np.array([[3.5, 1.0], [4.5, 1.0], [4.5, 2.0], [3.5, 2.0]])
    out = clip_to_chip(poly, 4, 4)
    assert polygon_area(out) == pytest.approx(0.5, abs=1e-12)
    assert cyclic_equal(out, [[3.5, 1.0], [4.0, 1.0], [4.0, 2.0], [3.5, 2.0]])


def test_clip_rejects_self_intersection():
    bowtie = np.array([[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]])
    assert not is_simple_polygon(bowtie)
    with pytest.raises(GeoscaleError, match="self-intersecting"):
        clip_to_chip(bowtie, 20, 20)


def test_clip_output_within_bounds():
    rng = np.random.default_rng(1)
    for _ in range(50):
        poly = random_star_polygon(rng, n=9, r_lo=5, r_hi=60, center=(20.0, 20.0))
        out = clip_to_chip(poly, 64, 64)
        if len(out):
            assert out[:, 0].min() >= -1e-9 and out[:, 0].max() <= 64 + 1e-9
            assert out[:, 1].min() >= -1e-9 and out[:, 1].max() <= 64 + 1e-9


# --- rasterization -------------------------------------------------------


def test_rasterize_full_cover():
    poly = np.array([[0.0, 0.0], [64.0, 0.0], [64.0, 64.0], [0.0, 64.0]])
    assert rasterize_mask(poly, 64, 64).all()


def test_rasterize_empty():
    assert not rasterize_mask(np.empty((0, 2)), 16, 16).any()


def test_rasterize_bad_dims():
    with pytest.raises(GeoscaleError):
        rasterize_mask(np.array([[0, 0], [1, 0], [1, 1]]), 0, 16)


def test_rasterize_matches_point_oracle():
    rng = np.random.default_rng(2)
    for i in range(25):
        poly = (
            random_star_polygon(rng, n=int(rng.integers(4, 12)))
            if i % 2
            else random_convex_polygon(rng, n=int(rng.integers(3, 9)))
        )
        mine = rasterize_mask(poly, 64, 64)
        oracle = rasterize_by_point_test(poly, 64, 64)
        assert np.array_equal(mine, oracle)


def test_rasterize_integer_translation_equivariance():
    rng = np.random.default_rng(3)
    poly = random_star_polygon(rng, n=8, r_lo=3, r_hi=12, center=(20.0, 20.0))
    base = rasterize_mask(poly, 64, 64)
    shifted = rasterize_mask(poly + np.array([7.0, 5.0]), 64, 64)
    assert np.array_equal(shifted[5:, 7:], base[:-5, :-7])


def test_rasterize_area_converges_with_resolution():
    rng = np.random.default_rng(4)
    poly = random_star_polygon(rng, n=10, r_lo=5, r_hi=28, center=(32.0, 32.0))
    true_area = polygon_area(poly)
    errors = []
    for factor in (1, 2, 4):
        scaled = poly * factor
        mask = rasterize_mask(scaled, 64 * factor, 64 * factor)
        errors.append(abs(mask.sum() / factor**2 - true_area))
    assert errors[2] < errors[0]
    assert errors[2] / true_area < 0.02


# --- rotated boxes -------------------------------------------------------


def test_box_axis_aligned_rectangle_self():
    rect = np.array([[1.0, 2.0], [5.0, 2.0], [5.0, 4.0], [1.0, 4.0]])
    box = rotated_bbox(rect)
    assert (box.cx, box.cy) == (3.0, 3.0)
    assert (box.w, box.h) == (4.0, 2.0)
    assert box.theta_deg == 0.0
    assert not box.degenerate


def test_box_rotated_unit_square():
    s = math.sqrt(2) / 2
    square = np.array([[0.0, 0.0], [s, s], [0.0, 2 * s], [-s, s]])
    box = rotated_bbox(square)
    assert box.w == pytest.approx(1.0, rel=1e-12)
    assert box.h == pytest.approx(1.0, rel=1e-12)
    assert box.theta_deg == pytest.approx(45.0, abs=1e-9)
    assert box.w * box.h == pytest.approx(1.0, rel=1e-12)


def test_box_degenerate_collinear():
    line = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    box = rotated_bbox(line)
    assert box.degenerate
    assert box.h == 0.0
    assert box.theta_deg == pytest.approx(45.0)
    assert box.w == pytest.approx(math.hypot(2, 2))


def test_box_beats_angle_sweep_oracle():
    rng = np.random.default_rng(5)
    for _ in range(50):
        poly = random_convex_polygon(rng, n=int(rng.integers(3, 12)))
        box = rotated_bbox(poly)
        sweep = min_rect_area_sweep(poly, step_deg=0.1)
        assert box.w * box.h <= sweep + 1e-6


def test_box_area_at_least_polygon_area():
    rng = np.random.default_rng(6)
    for _ in range(30):
        poly = random_convex_polygon(rng, n=8)
        box = rotated_bbox(poly)
        assert box.w * box.h >= polygon_area(poly) - 1e-9


def test_box_rotation_equivariance():
    rng = np.random.default_rng(7)
    poly = random_convex_polygon(rng, n=7)
    base = rotated_bbox(poly)
    assert abs(base.w - base.h) > 1e-6  # non-square so theta is unambiguous
    for phi in (10.0, 33.0, 120.0):
        r = math.radians(phi)
        rot = np.array([[math.cos(r), -math.sin(r)], [math.sin(r), math.cos(r)]])
        rotated = poly @ rot.T
        box = rotated_bbox(rotated)
        assert box.theta_deg == pytest.approx((base.theta_deg + phi) % 180.0, abs=1e-6)
        assert box.w == pytest.approx(base.w, rel=1e-9)
        assert box.h == pytest.approx(base.h, rel=1e-9)


def test_box_corners_enclose_hull():
    rng = np.random.default_rng(8)
    poly = random_convex_polygon(rng, n=9)
    box = rotated_bbox(poly)
    corners = box_corners(box)
    hull = convex_hull(np.vstack([corners, poly]))
    assert polygon_area(hull) == pytest.approx(box.w * box.h, rel=1e-9)


# --- ontology ------------------------------------------------------------


def classmap():
    return ClassMap(
        rules=(
            ClassRule("building", "*", 3),
            ClassRule("amenity", "school", 1),
            ClassRule("highway", "*", 0),
        ),
        class_names=("road", "school", "water", "building"),
    )


def poly_feature(coords, **tags):
    return Feature({k: str(v) for k, v in tags.items()}, Geometry("polygon", np.asarray(coords, dtype=np.float64)))


TRIANGLE = [[10.0, 10.0], [30.0, 10.0], [20.0, 30.0]]


def test_filter_direct_hit():
    out = filter_ontology([poly_feature(TRIANGLE, building="yes")], classmap())
    assert [cid for cid, _ in out] == [3]


def test_filter_unmatched_dropped():
    out = filter_ontology([poly_feature(TRIANGLE, natural="tree")], classmap())
    assert out == []


def test_filter_rule_precedence():
    out = filter_ontology([poly_feature(TRIANGLE, building="yes", amenity="school")], classmap())
    assert [cid for cid, _ in out] == [3]  # building rule is declared first


def test_filter_preserves_order():
    feats = [
        poly_feature(TRIANGLE, highway="residential"),
        poly_feature(TRIANGLE, building="yes"),
        poly_feature(TRIANGLE, amenity="school"),
    ]
    assert [cid for cid, _ in filter_ontology(feats, classmap())] == [0, 3, 1]


def test_classmap_from_dict_by_name():
    cm = ClassMap.from_dict(
        {"classes": ["road", "building"], "rules": [{"key": "building", "value": "*", "class": "building"}]}
    )
    assert cm.rules[0].class_id == 1
    with pytest.raises(GeoscaleError, match="unknown class"):
        ClassMap.from_dict({"classes": ["road"], "rules": [{"key": "x", "class": "nope"}]})


# --- bundle generation ---------------------------------------------------


def small_chip():
    return ChipSpec(image_id="c1", transform=IDENTITY, width=64, height=64)


def test_generate_single_building():
    bundle = generate_labels(small_chip(), [poly_feature(TRIANGLE, building="yes")], classmap())
    assert len(bundle.instances) == 1
    inst = bundle.instances[0]
    assert inst.class_id == 3
    assert inst.mask.sum() > 0
    expected = np.where(inst.mask.astype(bool), 3, BACKGROUND)
    assert np.array_equal(bundle.semantic_mask, expected)
    assert not inst.box.degenerate


def test_generate_no_matches():
    bundle = generate_labels(small_chip(), [poly_feature(TRIANGLE, natural="tree")], classmap())
    assert bundle.instances == ()
    assert (bundle.semantic_mask == BACKGROUND).all()


def test_generate_outside_chip_omitted():
    far = [[200.0, 200.0], [240.0, 200.0], [220.0, 240.0]]
    bundle = generate_labels(small_chip(), [poly_feature(far, building="yes")], classmap())
    assert bundle.instances == ()


def test_generate_precedence_resolves_overlap():
    square_a = [[10.0, 10.0], [40.0, 10.0], [40.0, 40.0], [10.0, 40.0]]
    square_b = [[25.0, 25.0], [55.0, 25.0], [55.0, 55.0], [25.0, 55.0]]
    feats = [
        poly_feature(square_b, highway="service"),   # class 0, later rule
        poly_feature(square_a, building="yes"),      # class 3, earlier rule -> wins overlap
    ]
    bundle = generate_labels(small_chip(), feats, classmap())
    assert len(bundle.instances) == 2
    overlap = bundle.instances[0].mask.astype(bool) & bundle.instances[1].mask.astype(bool)
    assert overlap.any()
    assert (bundle.semantic_mask[overlap] == 3).all()
    only_road = bundle.instances[0].mask.astype(bool) & ~overlap
    assert (bundle.semantic_mask[only_road] == 0).all()


def test_generate_semantic_is_precedence_union_of_instances():
    rng = np.random.default_rng(11)
    feats = [
        poly_feature(random_star_polygon(rng, n=8, r_lo=4, r_hi=20), building="yes"),
        poly_feature(random_star_polygon(rng, n=6, r_lo=4, r_hi=24), highway="x"),
        poly_feature(random_star_polygon(rng, n=7, r_lo=3, r_hi=18), amenity="school"),
    ]
    bundle = generate_labels(small_chip(), feats, classmap())
    rebuilt = np.full((64, 64), BACKGROUND, dtype=np.uint8)
    order = {3: 0, 1: 1, 0: 2}  # rule index per class in this map
    for inst in sorted(bundle.instances, key=lambda i: order[i.class_id], reverse=True):
        rebuilt[inst.mask.astype(bool)] = inst.class_id
    assert np.array_equal(bundle.semantic_mask, rebuilt)


def test_generate_line_buffering():
    line = Feature({"highway": "primary"}, Geometry("line", np.array([[5.0, 32.0], [60.0, 32.0]])))
    bundle = generate_labels(small_chip(), [line], classmap(), buffer_radius_px=1.5)
    assert len(bundle.instances) == 1
    mask = bundle.instances[0].mask
    assert mask[32, 30] == 1  # on the line
    assert mask[20, 30] == 0  # far from the line
    assert 2 <= mask[:, 30].sum() <= 4  # ~3 px wide strip


def test_generate_deterministic_bytes(tmp_path):
    rng = np.random.default_rng(12)
    feats = [
        poly_feature(random_star_polygon(rng, n=8), building="yes"),
        Feature({"highway": "a"}, Geometry("line", np.array([[0.0, 10.0], [63.0, 50.0]]))),
    ]
    out_a = write_bundle(generate_labels(small_chip(), feats, classmap()), tmp_path / "a")
    out_b = write_bundle(generate_labels(small_chip(), feats, classmap()), tmp_path / "b")
    files_a = sorted(p.name for p in out_a.iterdir())
    files_b = sorted(p.name for p in out_b.iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


# --- file formats ---------------------------------------------------------


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    arr = rng.integers(0, 256, size=(33, 47)).astype(np.uint8)
    path = tmp_path / "m.pgm"
    from geoscale.labelgen import write_pgm

    write_pgm(arr, path)
    assert np.array_equal(read_pgm(path), arr)


def test_rle_round_trip():
    rng = np.random.default_rng(14)
    for _ in range(20):
        mask = (rng.random((17, 23)) < 0.3).astype(np.uint8)
        runs = rle_encode(mask)
        assert sum(runs) == mask.size
        assert np.array_equal(rle_decode(runs, 23, 17), mask)


def test_bundle_files(tmp_path):
    bundle = generate_labels(small_chip(), [poly_feature(TRIANGLE, building="yes")], classmap())
    out = write_bundle(bundle, tmp_path)
    assert (out / "semantic.pgm").exists()
    assert (out / "instance_0.pgm").exists()
    assert (out / "boxes.csv").read_text().startswith("class,cx,cy,w,h,theta_deg")
    sidecar = json.loads((out / "masks.json").read_text())
    decoded = rle_decode(sidecar["instances"][0]["rle"], 64, 64)
    assert np.array_equal(decoded, bundle.instances[0].mask)
    semantic = read_pgm(out / "semantic.pgm")
    assert np.array_equal(semantic, bundle.semantic_mask)
    inst = read_pgm(out / "instance_0.pgm")
    assert np.array_equal(inst, bundle.instances[0].mask * 255)


def test_read_geojson(tmp_path):
    collection = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"building": "yes"},
                "geometry": {"type": "Polygon", "coordinates": [[[0, 0], [10, 0], [10, 10], [0, 0]]]},
            },
            {
                "type": "Feature",
                "properties": {"highway": "primary"},
                "geometry": {"type": "LineString", "coordinates": [[0, 0], [5, 5]]},
            },
            {
                "type": "Feature",
                "properties": {"building": "hut"},
                "geometry": {
                    "type": "MultiPolygon",
                    "coordinates": [
                        [[[0, 0], [2, 0], [1, 2], [0, 0]]],
                        [[[5, 5], [7, 5], [6, 7], [5, 5]]],
                    ],
                },
            },
        ],
    }
    path = tmp_path / "area.geojson"
    path.write_text(json.dumps(collection))
    feats = read_geojson(path)
    assert [f.geometry.kind for f in feats] == ["polygon", "line", "polygon", "polygon"]
    assert len(feats[0].geometry.coords) == 3  # closing vertex dropped
    assert feats[1].tags == {"highway": "primary"}


def test_read_chips(tmp_path):
    line = {
        "image_id": "img7",
        "col_off": 1024,
        "row_off": 0,
        "width": 256,
        "height": 128,
        "crs": "EPSG:32633",
        "transform": {"origin_x": 10.0, "origin_y": 20.0, "pixel_width": 0.5, "pixel_height": -0.5},
    }
    path = tmp_path / "chips.jsonl"
    path.write_text(json.dumps(line) + "\n")
    chips = read_chips(path)
    assert chips[0].image_id == "img7"
    assert chips[0].transform.pixel_height == -0.5
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"image_id": "x"}\n')
    with pytest.raises(GeoscaleError, match="missing field"):
        read_chips(bad)
