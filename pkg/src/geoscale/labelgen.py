"""Weak-label geometry pipeline for image chips.

Takes tagged vector features (e.g. open map data) already expressed in a
chip's coordinate reference system and produces chip-aligned supervision:
per-instance binary masks, a semantic mask, and minimum-area rotated
bounding boxes. Stages: ontology filtering -> world-to-pixel transform ->
clipping to the chip rectangle -> rasterization / box extraction.

Rasterization uses the pixel-center even-odd rule (a pixel is on iff its
center lies inside the polygon), which makes masks bit-reproducible.
Line and point features are buffered to polygons (default 1.5 px radius)
before rasterization. Interior polygon rings are ignored in this version.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fnmatch import fnmatchcase
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import GeoscaleError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

BACKGROUND = 255  # semantic-mask sentinel; class ids must stay below this

POLYGON = "polygon"
LINE = "line"
POINT = "point"


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel->world mapping, north-up only (no shear/rotation).

    x = origin_x + col * pixel_width; y = origin_y + row * pixel_height.
    pixel_height is typically negative for north-up imagery.
    """

    origin_x: float
    origin_y: float
    pixel_width: float
    pixel_height: float
    row_rotation: float = 0.0
    col_rotation: float = 0.0

    def __post_init__(self):
        if self.pixel_width == 0 or self.pixel_height == 0:
            raise GeoscaleError("pixel size must be nonzero")

    def _require_axis_aligned(self):
        if self.row_rotation != 0 or self.col_rotation != 0:
            raise GeoscaleError("rotated geotransforms are not supported")


@dataclass(frozen=True)
class ChipSpec:
    """A fixed-size window into a source image."""

    image_id: str
    transform: GeoTransform
    col_off: int = 0
    row_off: int = 0
    width: int = 1024
    height: int = 1024
    crs: str = ""

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise GeoscaleError("chip dimensions must be positive")


def chip_footprint(chip: ChipSpec) -> np.ndarray:
    """World-space quadrilateral of the chip's corner pixels, CCW, shape (4, 2)."""
    chip.transform._require_axis_aligned()
    t = chip.transform
    c0, r0 = chip.col_off, chip.row_off
    corners_px = [(c0, r0), (c0 + chip.width, r0), (c0 + chip.width, r0 + chip.height), (c0, r0 + chip.height)]
    corners = np.array([(t.origin_x + c * t.pixel_width, t.origin_y + r * t.pixel_height) for c, r in corners_px])
    if _signed_area(corners) < 0:
        corners = np.vstack([corners[:1], corners[1:][::-1]])
    return corners


def world_to_pixel(geometry: np.ndarray, chip: ChipSpec) -> np.ndarray:
    """Map world-space vertices (n, 2) into chip-local pixel coordinates."""
    chip.transform._require_axis_aligned()
    t = chip.transform
    pts = np.asarray(geometry, dtype=np.float64).reshape(-1, 2)
    col = (pts[:, 0] - t.origin_x) / t.pixel_width - chip.col_off
    row = (pts[:, 1] - t.origin_y) / t.pixel_height - chip.row_off
    return np.column_stack([col, row])


def pixel_to_world(geometry: np.ndarray, chip: ChipSpec) -> np.ndarray:
    """Inverse of world_to_pixel."""
    chip.transform._require_axis_aligned()
    t = chip.transform
    pts = np.asarray(geometry, dtype=np.float64).reshape(-1, 2)
    x = t.origin_x + (pts[:, 0] + chip.col_off) * t.pixel_width
    y = t.origin_y + (pts[:, 1] + chip.row_off) * t.pixel_height
    return np.column_stack([x, y])


# ---------------------------------------------------------------------------
# polygon primitives
# ---------------------------------------------------------------------------


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly: np.ndarray) -> float:
    """Absolute shoelace area; 0 for fewer than 3 vertices."""
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(poly) < 3:
        return 0.0
    return abs(_signed_area(poly))


def _drop_closing_vertex(poly: np.ndarray) -> np.ndarray:
    if len(poly) > 1 and np.array_equal(poly[0], poly[-1]):
        return poly[:-1]
    return poly


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p, q, r) -> bool:
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _cross(p3, p4, p1)
    d2 = _cross(p3, p4, p2)
    d3 = _cross(p1, p2, p3)
    d4 = _cross(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(p3, p1, p4):
        return True
    if d2 == 0 and _on_segment(p3, p2, p4):
        return True
    if d3 == 0 and _on_segment(p1, p3, p2):
        return True
    if d4 == 0 and _on_segment(p1, p4, p2):
        return True
    return False


def is_simple_polygon(poly: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect or touch."""
    poly = _drop_closing_vertex(np.asarray(poly, dtype=np.float64).reshape(-1, 2))
    n = len(poly)
    if n < 3:
        return False
    for i in range(n):
        p1, p2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(p1, p2, poly[j], poly[(j + 1) % n]):
                return False
    return True


def clip_to_chip(polygon: np.ndarray, width: float, height: float) -> np.ndarray:
    """Intersect a simple polygon with the rectangle [0, width] x [0, height].

    Successive half-plane (Sutherland-Hodgman) clipping; the result may be
    empty, returned as a (0, 2) array. Self-intersecting input is rejected.
    """
    poly = _drop_closing_vertex(np.asarray(polygon, dtype=np.float64).reshape(-1, 2))
    if len(poly) < 3:
        raise GeoscaleError("clip input must have at least 3 vertices")
    if not is_simple_polygon(poly):
        raise GeoscaleError("clip input polygon is self-intersecting")

    # (axis, bound, keep_below): keep points with coord <= bound or >= bound.
    planes = [(0, 0.0, False), (0, float(width), True), (1, 0.0, False), (1, float(height), True)]
    verts = [tuple(p) for p in poly]
    for axis, bound, keep_below in planes:
        if not verts:
            break
        def inside(pt):
            return pt[axis] <= bound if keep_below else pt[axis] >= bound

        def intersect(a, b):
            t = (bound - a[axis]) / (b[axis] - a[axis])
            return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))

        out = []
        for i, current in enumerate(verts):
            previous = verts[i - 1]
            if inside(current):
                if not inside(previous):
                    out.append(intersect(previous, current))
                out.append(current)
            elif inside(previous):
                out.append(intersect(previous, current))
        verts = out

    cleaned: list[tuple[float, float]] = []
    for pt in verts:
        if not cleaned or pt != cleaned[-1]:
            cleaned.append(pt)
    if len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
        cleaned.pop()
    if len(cleaned) < 3:
        return np.empty((0, 2))
    return np.array(cleaned)


def rasterize_mask(polygon: np.ndarray, width: int, height: int) -> np.ndarray:
    """Binary (height, width) mask: 1 where the pixel center (c+0.5, r+0.5)
    lies inside the polygon under the even-odd rule. Scanline fill."""
    if width <= 0 or height <= 0:
        raise GeoscaleError("mask dimensions must be positive")
    mask = np.zeros((height, width), dtype=np.uint8)
    poly = _drop_closing_vertex(np.asarray(polygon, dtype=np.float64).reshape(-1, 2))
    if len(poly) < 3:
        return mask
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for r in range(height):
        py = r + 0.5
        hit = ((y1 <= py) & (py < y2)) | ((y2 <= py) & (py < y1))
        if not hit.any():
            continue
        t = (py - y1[hit]) / (y2[hit] - y1[hit])
        xs = np.sort(x1[hit] + t * (x2[hit] - x1[hit]))
        for a, b in zip(xs[0::2], xs[1::2]):
            c_lo = max(math.ceil(a - 0.5), 0)
            c_hi = min(math.ceil(b - 0.5) - 1, width - 1)
            if c_hi >= c_lo:
                mask[r, c_lo : c_hi + 1] = 1
    return mask


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull (monotone chain), CCW, collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def build(ordered):
        chain: list[np.ndarray] = []
        for p in ordered:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    return hull if len(hull) >= 3 else np.unique(hull, axis=0)


@dataclass(frozen=True)
class RotatedBox:
    """Minimum-area oriented rectangle: center, extents, angle.

    Canonical form has w >= h and theta_deg in [0, 180) (in [0, 90) when
    w == h). ``degenerate`` marks collinear input, reported as a zero-height
    box along the point spread.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta_deg: float
    degenerate: bool = False


def box_corners(box: RotatedBox) -> np.ndarray:
    """Corner coordinates of a RotatedBox, shape (4, 2), CCW."""
    theta = math.radians(box.theta_deg)
    u = np.array([math.cos(theta), math.sin(theta)])
    v = np.array([-u[1], u[0]])
    center = np.array([box.cx, box.cy])
    hw, hh = box.w / 2.0, box.h / 2.0
    return np.array([center - hw * u - hh * v, center + hw * u - hh * v,
                     center + hw * u + hh * v, center - hw * u + hh * v])


def rotated_bbox(polygon: np.ndarray) -> RotatedBox:
    """Minimum-area enclosing rectangle via convex hull + edge-direction sweep.

    Every minimum-area rectangle has a side collinear with a hull edge, so
    sweeping hull-edge directions is exact. Collinear input yields a
    degenerate (h = 0) box flagged as such.
    """
    pts = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise GeoscaleError("cannot box an empty point set")
    hull = convex_hull(pts)
    if len(hull) < 3:
        if len(hull) == 1:
            return RotatedBox(float(hull[0, 0]), float(hull[0, 1]), 0.0, 0.0, 0.0, degenerate=True)
        d = hull[1] - hull[0]
        mid = hull.mean(axis=0)
        theta = math.degrees(math.atan2(d[1], d[0])) % 180.0
        return RotatedBox(float(mid[0]), float(mid[1]), float(np.hypot(*d)), 0.0, theta, degenerate=True)

    edges = np.roll(hull, -1, axis=0) - hull
    best = None
    for ex, ey in edges:
        length = math.hypot(ex, ey)
        u = np.array([ex / length, ey / length])
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        du = pu.max() - pu.min()
        dv = pv.max() - pv.min()
        area = du * dv
        if best is None or area < best[0]:
            center = ((pu.min() + pu.max()) / 2.0) * u + ((pv.min() + pv.max()) / 2.0) * v
            best = (area, u, v, du, dv, center)

    _, u, v, du, dv, center = best
    if du >= dv:
        w, h, axis = du, dv, u
    else:
        w, h, axis = dv, du, v
    theta = math.degrees(math.atan2(axis[1], axis[0])) % 180.0
    if abs(w - h) <= 1e-9 * max(w, h):  # square: pick the smaller equivalent angle
        theta %= 90.0
    return RotatedBox(float(center[0]), float(center[1]), float(w), float(h), theta)


# ---------------------------------------------------------------------------
# ontology and features
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Geometry:
    kind: str  # POLYGON, LINE, or POINT
    coords: np.ndarray  # (n, 2) world coordinates

    def __post_init__(self):
        if self.kind not in (POLYGON, LINE, POINT):
            raise GeoscaleError(f"unknown geometry kind {self.kind!r}")
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=np.float64).reshape(-1, 2))


@dataclass(frozen=True)
class Feature:
    tags: dict[str, str]
    geometry: Geometry


@dataclass(frozen=True)
class ClassRule:
    key: str
    pattern: str  # fnmatch-style; "*" matches any value
    class_id: int


@dataclass(frozen=True)
class ClassMap:
    """Ordered tag rules mapping features to dense class ids.

    Rule order defines precedence: the first matching rule classifies a
    feature, and earlier-rule instances win semantic-mask overlaps.
    """

    rules: tuple[ClassRule, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.class_names) > BACKGROUND:
            raise GeoscaleError(f"at most {BACKGROUND} classes are supported")
        for rule in self.rules:
            if not 0 <= rule.class_id < len(self.class_names):
                raise GeoscaleError(f"rule {rule.key}={rule.pattern} names unknown class id {rule.class_id}")

    def match(self, tags: dict[str, str]) -> Optional[tuple[int, int]]:
        """(rule index, class id) of the first matching rule, or None."""
        for idx, rule in enumerate(self.rules):
            value = tags.get(rule.key)
            if value is not None and fnmatchcase(str(value), rule.pattern):
                return idx, rule.class_id
        return None

    @staticmethod
    def from_dict(data: dict) -> "ClassMap":
        names = tuple(str(n) for n in data.get("classes", ()))
        if not names:
            raise GeoscaleError("class map declares no classes")
        index = {n: i for i, n in enumerate(names)}
        rules = []
        for entry in data.get("rules", ()):
            ref = entry["class"]
            if isinstance(ref, str):
                if ref not in index:
                    raise GeoscaleError(f"rule references unknown class {ref!r}")
                class_id = index[ref]
            else:
                class_id = int(ref)
            rules.append(ClassRule(str(entry["key"]), str(entry.get("value", "*")), class_id))
        if not rules:
            raise GeoscaleError("class map declares no rules")
        return ClassMap(tuple(rules), names)

    @staticmethod
    def from_file(path: str | Path) -> "ClassMap":
        path = Path(path)
        if path.suffix.lower() == ".json":
            with open(path) as fh:
                return ClassMap.from_dict(json.load(fh))
        with open(path, "rb") as fh:
            return ClassMap.from_dict(tomllib.load(fh))


def filter_ontology(features: Sequence[Feature], classmap: ClassMap) -> list[tuple[int, Feature]]:
    """(class id, feature) for every feature matching a rule, input order
    preserved; unmatched features are dropped."""
    out = []
    for feat in features:
        matched = classmap.match(feat.tags)
        if matched is not None:
            out.append((matched[1], feat))
    return out


# ---------------------------------------------------------------------------
# bundle generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Instance:
    class_id: int
    mask: np.ndarray  # uint8 (chip height, chip width), values 0/1
    box: RotatedBox


@dataclass(frozen=True, eq=False)
class LabelBundle:
    chip: ChipSpec
    instances: tuple[Instance, ...]
    semantic_mask: np.ndarray  # uint8 class ids, BACKGROUND where uncovered


def _buffered_rings(coords: np.ndarray, kind: str, radius: float) -> list[np.ndarray]:
    """Buffer a pixel-space line or point to polygon exterior ring(s)."""
    from shapely.geometry import LineString, Point

    if kind == POINT or len(coords) == 1:
        shape = Point(coords[0]).buffer(radius, quad_segs=8)
    else:
        shape = LineString(coords).buffer(radius, quad_segs=8)
    parts = shape.geoms if shape.geom_type == "MultiPolygon" else [shape]
    return [np.asarray(part.exterior.coords)[:-1] for part in parts if not part.is_empty]


def generate_labels(
    chip: ChipSpec,
    features: Sequence[Feature],
    classmap: ClassMap,
    buffer_radius_px: float = 1.5,
) -> LabelBundle:
    """Run the full pipeline for one chip.

    Features must already be in the chip's CRS. Instances whose clipped
    geometry is empty are omitted. The semantic mask resolves overlaps by
    rule precedence (then input order): it is painted in descending
    (rule index, input index) order so the earliest rule/feature lands on
    top. Output is deterministic for identical inputs.
    """
    drawable = []  # (rule_idx, input_idx, class_id, mask, box)
    input_idx = 0
    for feat in features:
        matched = classmap.match(feat.tags)
        if matched is None:
            continue
        rule_idx, class_id = matched
        pix = world_to_pixel(feat.geometry.coords, chip)
        if feat.geometry.kind == POLYGON:
            rings = [pix]
        else:
            rings = _buffered_rings(pix, feat.geometry.kind, buffer_radius_px)
        clipped = []
        for ring in rings:
            if len(ring) < 3:
                continue
            piece = clip_to_chip(ring, chip.width, chip.height)
            if len(piece) >= 3 and polygon_area(piece) > 0.0:
                clipped.append(piece)
        if not clipped:
            input_idx += 1
            continue
        mask = np.zeros((chip.height, chip.width), dtype=np.uint8)
        for piece in clipped:
            mask |= rasterize_mask(piece, chip.width, chip.height)
        box = rotated_bbox(np.vstack(clipped))
        drawable.append((rule_idx, input_idx, class_id, mask, box))
        input_idx += 1

    semantic = np.full((chip.height, chip.width), BACKGROUND, dtype=np.uint8)
    for rule_idx, idx, class_id, mask, _ in sorted(drawable, key=lambda t: (t[0], t[1]), reverse=True):
        semantic[mask.astype(bool)] = class_id

    instances = tuple(Instance(class_id, mask, box) for _, _, class_id, mask, box in drawable)
    return LabelBundle(chip, instances, semantic)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def read_geojson(path: str | Path) -> list[Feature]:
    """Load a GeoJSON FeatureCollection; ``properties`` become the tag map.

    Multi-part geometries expand to one Feature per part (tags shared);
    unsupported geometry types are skipped. Polygon interior rings are
    ignored.
    """
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("type") != "FeatureCollection":
        raise GeoscaleError("expected a GeoJSON FeatureCollection")
    features: list[Feature] = []
    for raw in obj.get("features", []):
        tags = {str(k): str(v) for k, v in (raw.get("properties") or {}).items()}
        geom = raw.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        if gtype == "Polygon":
            features.append(Feature(tags, Geometry(POLYGON, _drop_closing_vertex(np.array(coords[0])))))
        elif gtype == "MultiPolygon":
            for part in coords:
                features.append(Feature(tags, Geometry(POLYGON, _drop_closing_vertex(np.array(part[0])))))
        elif gtype == "LineString":
            features.append(Feature(tags, Geometry(LINE, np.array(coords))))
        elif gtype == "MultiLineString":
            for part in coords:
                features.append(Feature(tags, Geometry(LINE, np.array(part))))
        elif gtype == "Point":
            features.append(Feature(tags, Geometry(POINT, np.array([coords]))))
    return features


def read_chips(path: str | Path) -> list[ChipSpec]:
    """Load chip specs from JSON-lines (one chip object per line)."""
    chips = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise GeoscaleError(f"chips line {line_no}: malformed JSON ({exc.msg})") from None
            try:
                t = obj["transform"]
                chips.append(
                    ChipSpec(
                        image_id=str(obj["image_id"]),
                        transform=GeoTransform(
                            float(t["origin_x"]), float(t["origin_y"]),
                            float(t["pixel_width"]), float(t["pixel_height"]),
                            float(t.get("row_rotation", 0.0)), float(t.get("col_rotation", 0.0)),
                        ),
                        col_off=int(obj.get("col_off", 0)),
                        row_off=int(obj.get("row_off", 0)),
                        width=int(obj.get("width", 1024)),
                        height=int(obj.get("height", 1024)),
                        crs=str(obj.get("crs", "")),
                    )
                )
            except KeyError as exc:
                raise GeoscaleError(f"chips line {line_no}: missing field {exc.args[0]!r}") from None
    return chips


def write_pgm(array: np.ndarray, path: str | Path) -> None:
    """Binary PGM (P5, one byte per pixel)."""
    arr = np.asarray(array, dtype=np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + arr.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise GeoscaleError(f"{path}: not a binary PGM")
    parts = data.split(b"\n", 3)
    width, height = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=width * height).reshape(height, width)


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths of a binary mask, alternating starting with zeros."""
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    runs: list[int] = []
    value = 0
    pos = 0
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    for end in list(boundaries) + [len(flat)]:
        if flat[pos] != value:
            runs.append(0)
            value = flat[pos]
        runs.append(int(end - pos))
        value = 1 - value
        pos = end
    return runs


def rle_decode(runs: Sequence[int], width: int, height: int) -> np.ndarray:
    flat = np.zeros(width * height, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value = 1 - value
    if pos != width * height:
        raise GeoscaleError("run lengths do not cover the mask")
    return flat.reshape(height, width)


def write_bundle(bundle: LabelBundle, out_dir: str | Path) -> Path:
    """Write one chip's labels under out_dir/<image_id>/.

    Emits semantic.pgm (class ids, background 255), instance_<k>.pgm
    (0/255), boxes.csv, and masks.json (run-length sidecar).
    """
    chip_dir = Path(out_dir) / bundle.chip.image_id
    chip_dir.mkdir(parents=True, exist_ok=True)
    write_pgm(bundle.semantic_mask, chip_dir / "semantic.pgm")
    rle_instances = []
    with open(chip_dir / "boxes.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "cx", "cy", "w", "h", "theta_deg"])
        for k, inst in enumerate(bundle.instances):
            write_pgm(inst.mask * 255, chip_dir / f"instance_{k}.pgm")
            writer.writerow(
                [inst.class_id, repr(inst.box.cx), repr(inst.box.cy),
                 repr(inst.box.w), repr(inst.box.h), repr(inst.box.theta_deg)]
            )
            rle_instances.append({"class": inst.class_id, "rle": rle_encode(inst.mask)})
    sidecar = {
        "width": bundle.chip.width,
        "height": bundle.chip.height,
        "background": BACKGROUND,
        "instances": rle_instances,
    }
    with open(chip_dir / "masks.json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, separators=(",", ":"))
    return chip_dir
