"""Image-catalog manifests: parsing, validation, and summary statistics.

A manifest is one record per satellite image carrying the numeric and
categorical attributes the sampler balances on. Two file forms are
supported: JSON-lines (canonical; keys ``id``, ``lon``, ``lat``, ``time``,
``num``, ``cat``) and CSV (convenience; dotted header keys such as
``num.obliquity_deg`` / ``cat.sensor_type``). Unknown extra fields are
preserved on the record but ignored by downstream consumers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import GeoscaleError, ManifestError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# Attributes derivable from the acquisition timestamp when absent.
_DERIVED_FROM_TIME = {"month": lambda t: f"{t.month:02d}", "year": lambda t: str(t.year)}

# Physically valid ground-sample-distance range in meters.
GSD_RANGE = (0.3, 1.2)


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str  # NUMERIC or CATEGORICAL
    required: bool = True

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise GeoscaleError(f"unknown attribute kind {self.kind!r} for {self.name!r}")


@dataclass(frozen=True)
class AttributeSchema:
    """Declared balancing attributes. Declaration order is meaningful:
    the sampler cycles attributes in this order."""

    attributes: tuple[AttributeSpec, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise GeoscaleError("duplicate attribute names in schema")

    @property
    def numeric(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes if a.kind == NUMERIC)

    @property
    def categorical(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes if a.kind == CATEGORICAL)

    def spec_for(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise GeoscaleError(f"attribute {name!r} not in schema")

    @staticmethod
    def from_dict(data: dict) -> "AttributeSchema":
        attrs = []
        for entry in data.get("attributes", []):
            attrs.append(
                AttributeSpec(
                    name=entry["name"],
                    kind=entry["kind"],
                    required=bool(entry.get("required", True)),
                )
            )
        if not attrs:
            raise GeoscaleError("schema declares no attributes")
        return AttributeSchema(tuple(attrs))

    @staticmethod
    def from_toml(path: str | Path) -> "AttributeSchema":
        with open(path, "rb") as fh:
            return AttributeSchema.from_dict(tomllib.load(fh))


@dataclass(frozen=True)
class ImageRecord:
    """One manifest row.

    ``numeric_attrs`` / ``categorical_attrs`` hold the declared balancing
    attributes; ``extra`` holds unrecognized manifest fields verbatim.
    """

    id: str
    lon: float
    lat: float
    time: datetime
    numeric_attrs: dict[str, float] = field(default_factory=dict)
    categorical_attrs: dict[str, str] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Catalog:
    """Records in manifest order plus the schema they satisfy."""

    records: tuple[ImageRecord, ...]
    schema: AttributeSchema

    def __len__(self) -> int:
        return len(self.records)

    def numeric_column(self, name: str) -> np.ndarray:
        try:
            return np.array([r.numeric_attrs[name] for r in self.records], dtype=np.float64)
        except KeyError as exc:
            raise GeoscaleError(f"attribute {name!r} missing on record {exc.args[0]!r}") from exc

    def categorical_column(self, name: str) -> list[str]:
        out = []
        for r in self.records:
            if name not in r.categorical_attrs:
                raise GeoscaleError(f"attribute {name!r} missing on record {r.id!r}")
            out.append(r.categorical_attrs[name])
        return out


def _parse_time(raw: str, line: int) -> datetime:
    try:
        t = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except (ValueError, AttributeError):
        raise ManifestError(f"invalid timestamp {raw!r}", line) from None
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def _validate_record(rec_id, lon, lat, time_raw, num, cat, extra, schema, line) -> ImageRecord:
    if not rec_id:
        raise ManifestError("missing id", line)
    try:
        lon = float(lon)
        lat = float(lat)
    except (TypeError, ValueError):
        raise ManifestError("lon/lat must be numbers", line) from None
    if not -180.0 <= lon <= 180.0:
        raise ManifestError(f"lon {lon} outside [-180, 180]", line)
    if not -90.0 <= lat <= 90.0:
        raise ManifestError(f"lat {lat} outside [-90, 90]", line)
    time = _parse_time(time_raw, line)

    numeric: dict[str, float] = {}
    for key, val in num.items():
        try:
            numeric[key] = float(val)
        except (TypeError, ValueError):
            raise ManifestError(f"numeric attribute {key!r} has non-numeric value {val!r}", line) from None
    categorical = {key: str(val) for key, val in cat.items()}

    # month/year may be derived from the acquisition time when declared
    # categorical but absent from the manifest row.
    for name, derive in _DERIVED_FROM_TIME.items():
        if name in schema.categorical and name not in categorical:
            categorical[name] = derive(time)

    if "gsd_m" in numeric and not (GSD_RANGE[0] <= numeric["gsd_m"] <= GSD_RANGE[1]):
        raise ManifestError(f"gsd_m {numeric['gsd_m']} outside [{GSD_RANGE[0]}, {GSD_RANGE[1]}]", line)

    for spec in schema.attributes:
        bag = numeric if spec.kind == NUMERIC else categorical
        if spec.required and spec.name not in bag:
            raise ManifestError(f"missing {spec.name}", line)

    return ImageRecord(str(rec_id), lon, lat, time, numeric, categorical, dict(extra))


_JSONL_KEYS = {"id", "lon", "lat", "time", "num", "cat"}


def _parse_jsonl(path: Path, schema: AttributeSchema) -> list[ImageRecord]:
    records = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"malformed JSON ({exc.msg})", line_no) from None
            if not isinstance(obj, dict):
                raise ManifestError("expected a JSON object", line_no)
            extra = {k: v for k, v in obj.items() if k not in _JSONL_KEYS}
            records.append(
                _validate_record(
                    obj.get("id"), obj.get("lon"), obj.get("lat"), obj.get("time"),
                    obj.get("num", {}) or {}, obj.get("cat", {}) or {}, extra,
                    schema, line_no,
                )
            )
    return records


def _parse_csv(path: Path, schema: AttributeSchema) -> list[ImageRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestError("empty CSV manifest", 1)
        for line_no, row in enumerate(reader, start=2):
            num, cat, extra = {}, {}, {}
            for key, val in row.items():
                if key in ("id", "lon", "lat", "time") or val is None or val == "":
                    continue
                if key.startswith("num."):
                    num[key[4:]] = val
                elif key.startswith("cat."):
                    cat[key[4:]] = val
                else:
                    extra[key] = val
            records.append(
                _validate_record(
                    row.get("id"), row.get("lon"), row.get("lat"), row.get("time"),
                    num, cat, extra, schema, line_no,
                )
            )
    return records


def parse_manifest(path: str | Path, schema: AttributeSchema) -> Catalog:
    """Read a JSON-lines or CSV manifest into a validated Catalog.

    Record order follows file order. Raises ManifestError (with the
    offending line number) on malformed rows, schema violations,
    out-of-range coordinates, or duplicate ids.
    """
    path = Path(path)
    if not path.exists():
        raise GeoscaleError(f"manifest not found: {path}")
    if path.suffix.lower() == ".csv":
        records = _parse_csv(path, schema)
    else:
        records = _parse_jsonl(path, schema)

    seen: dict[str, int] = {}
    for idx, rec in enumerate(records):
        if rec.id in seen:
            raise ManifestError(f"duplicate id {rec.id!r} (first seen at record {seen[rec.id] + 1})")
        seen[rec.id] = idx
    return Catalog(tuple(records), schema)


def serialize_manifest(catalog: Catalog, path: str | Path) -> None:
    """Write a catalog back to canonical JSON-lines form.

    Round-trips exactly: parse_manifest(serialize_manifest(c)) == c.
    """
    with open(path, "w") as fh:
        for rec in catalog.records:
            obj = {
                "id": rec.id,
                "lon": rec.lon,
                "lat": rec.lat,
                "time": rec.time.isoformat(),
                "num": rec.numeric_attrs,
                "cat": rec.categorical_attrs,
                **rec.extra,
            }
            fh.write(json.dumps(obj, sort_keys=False) + "\n")


@dataclass(frozen=True)
class NumericSummary:
    count: int
    minimum: float
    maximum: float
    mean: float
    quantiles: dict[float, float]  # q -> value, linear interpolation


@dataclass(frozen=True)
class AttributeSummary:
    """Per-attribute histograms for coverage reporting."""

    record_count: int
    categorical: dict[str, dict[str, int]]
    numeric: dict[str, NumericSummary]

    def to_csv_rows(self) -> list[list]:
        rows: list[list] = [["attribute", "kind", "key", "value"]]
        for name, counts in self.categorical.items():
            for value, count in counts.items():
                rows.append([name, CATEGORICAL, value, count])
        for name, s in self.numeric.items():
            rows.append([name, NUMERIC, "count", s.count])
            rows.append([name, NUMERIC, "min", s.minimum])
            rows.append([name, NUMERIC, "max", s.maximum])
            rows.append([name, NUMERIC, "mean", s.mean])
            for q, v in s.quantiles.items():
                rows.append([name, NUMERIC, f"q{q:g}", v])
        return rows


def summarize(catalog: Catalog, quantiles: tuple[float, ...] = (0.25, 0.5, 0.75)) -> AttributeSummary:
    """Histogram every declared attribute over the catalog."""
    if len(catalog) == 0:
        raise GeoscaleError("cannot summarize an empty catalog")
    cat_counts: dict[str, dict[str, int]] = {}
    for name in catalog.schema.categorical:
        counts: dict[str, int] = {}
        for v in catalog.categorical_column(name):
            counts[v] = counts.get(v, 0) + 1
        cat_counts[name] = dict(sorted(counts.items()))
    num_summaries: dict[str, NumericSummary] = {}
    for name in catalog.schema.numeric:
        col = catalog.numeric_column(name)
        num_summaries[name] = NumericSummary(
            count=len(col),
            minimum=float(col.min()),
            maximum=float(col.max()),
            mean=float(col.mean()),
            quantiles={q: float(np.quantile(col, q)) for q in quantiles},
        )
    return AttributeSummary(len(catalog), cat_counts, num_summaries)
