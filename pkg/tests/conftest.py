import json
from datetime import datetime, timezone

import numpy as np
import pytest

from geoscale.catalog import (
    CATEGORICAL,
    NUMERIC,
    AttributeSchema,
    AttributeSpec,
    Catalog,
    ImageRecord,
)


def make_record(i, numeric=None, categorical=None, **over):
    fields = dict(
        id=f"IMG_{i:04d}",
        lon=float(i % 90),
        lat=float(i % 45),
        time=datetime(2023, 5, 1, 12, tzinfo=timezone.utc),
        numeric_attrs=dict(numeric or {}),
        categorical_attrs=dict(categorical or {}),
    )
    fields.update(over)
    return ImageRecord(**fields)


def make_catalog(numeric_cols=None, categorical_cols=None):
    """Catalog from parallel columns: {"v": [1, 2, ...]}, {"sensor": [...]}"""
    numeric_cols = numeric_cols or {}
    categorical_cols = categorical_cols or {}
    lengths = {len(v) for v in list(numeric_cols.values()) + list(categorical_cols.values())}
    assert len(lengths) == 1, "columns must share a length"
    n = lengths.pop()
    attrs = [AttributeSpec(name, NUMERIC) for name in numeric_cols]
    attrs += [AttributeSpec(name, CATEGORICAL) for name in categorical_cols]
    schema = AttributeSchema(tuple(attrs))
    records = tuple(
        make_record(
            i,
            numeric={k: float(v[i]) for k, v in numeric_cols.items()},
            categorical={k: str(v[i]) for k, v in categorical_cols.items()},
        )
        for i in range(n)
    )
    return Catalog(records, schema)


def manifest_line(i, **over):
    row = {
        "id": f"IMG_{i:03d}",
        "lon": 10.0 + i,
        "lat": 5.0 + i * 0.1,
        "time": "2023-05-01T12:00:00+00:00",
        "num": {"obliquity_deg": 10.0 + i, "population_density_per_km2": 100.0 * (i + 1)},
        "cat": {"sensor_type": "A" if i % 2 else "B"},
    }
    row.update(over)
    return json.dumps(row)


@pytest.fixture
def basic_schema():
    return AttributeSchema(
        (
            AttributeSpec("obliquity_deg", NUMERIC),
            AttributeSpec("population_density_per_km2", NUMERIC),
            AttributeSpec("sensor_type", CATEGORICAL),
        )
    )


def random_convex_polygon(rng, n=8, radius=20.0, center=(32.0, 32.0)):
    """Convex polygon: hull of random points (at least a triangle)."""
    while True:
        pts = center + rng.uniform(-radius, radius, size=(n, 2))
        hull = _hull(pts)
        if len(hull) >= 3:
            return hull


def random_star_polygon(rng, n=10, r_lo=2.0, r_hi=28.0, center=(32.0, 32.0)):
    """Star-shaped (hence simple) polygon around the center.

    Keeps every angular gap below pi: otherwise a chord can pass the far
    side of the center and the polygon self-intersects.
    """
    while True:
        angles = np.sort(rng.uniform(0, 2 * np.pi, n))
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
        if gaps.max() < 0.9 * np.pi:
            break
    radii = rng.uniform(r_lo, r_hi, n)
    return np.column_stack(
        [center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)]
    )


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _hull(points):
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts

    def build(ordered):
        chain = []
        for p in ordered:
            while len(chain) >= 2 and _cross2(chain[-1] - chain[-2], p - chain[-2]) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])
