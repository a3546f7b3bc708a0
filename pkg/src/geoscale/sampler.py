"""Balanced, nested catalog subsets.

The pipeline is: quantile-bin every balancing attribute, rake per-record
weights until each attribute's weighted marginal is uniform over its
nonempty bins, draw one weighted permutation without replacement, and cut
nested subsets as prefixes of that permutation (so every smaller subset is
contained in every larger one by construction).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import CATEGORICAL, NUMERIC, Catalog
from .errors import GeoscaleError


@dataclass(frozen=True, eq=False)
class BinAssignment:
    """Maps every record of a catalog to exactly one bin of one attribute.

    For numeric attributes ``edges`` holds the interior bin edges
    (ascending, duplicates collapsed); bin ``i`` covers
    ``(edges[i-1], edges[i]]``. For categorical attributes ``categories``
    holds the sorted category labels and the bin index is the label index.
    """

    attribute: str
    kind: str
    bin_of_record: np.ndarray  # int64, shape (n_records,)
    edges: np.ndarray | None = None
    categories: tuple[str, ...] | None = None

    @property
    def n_bins(self) -> int:
        if self.kind == NUMERIC:
            return len(self.edges) + 1 if self.edges is not None else 1
        return len(self.categories or ())


def quantile_bin(catalog: Catalog, attribute: str, k: int) -> BinAssignment:
    """Bin a numeric attribute at its empirical 1/k .. (k-1)/k quantiles.

    Duplicate edges collapse, so the effective bin count may be below k
    (a constant attribute yields a single bin).
    """
    if k < 1:
        raise GeoscaleError(f"bin count must be >= 1, got {k}")
    values = catalog.numeric_column(attribute)
    if k == 1:
        edges = np.empty(0)
    else:
        qs = np.arange(1, k) / k
        edges = np.unique(np.quantile(values, qs))
        # drop edges that would leave a bin empty, so every bin is occupied
        kept: list[float] = []
        prev = -np.inf
        for e in edges:
            if np.any((values > prev) & (values <= e)):
                kept.append(float(e))
                prev = e
        while kept and not np.any(values > kept[-1]):
            kept.pop()
        edges = np.array(kept)
    bins = np.searchsorted(edges, values, side="left").astype(np.int64)
    return BinAssignment(attribute, NUMERIC, bins, edges=edges)


def categorical_bin(catalog: Catalog, attribute: str) -> BinAssignment:
    """One bin per observed category, in sorted label order."""
    column = catalog.categorical_column(attribute)
    categories = tuple(sorted(set(column)))
    index = {c: i for i, c in enumerate(categories)}
    bins = np.array([index[v] for v in column], dtype=np.int64)
    return BinAssignment(attribute, CATEGORICAL, bins, categories=categories)


def bin_catalog(catalog: Catalog, k: int = 10) -> list[BinAssignment]:
    """Bin every schema attribute: numeric via quantiles, categorical by label."""
    out = []
    for spec in catalog.schema.attributes:
        if spec.kind == NUMERIC:
            out.append(quantile_bin(catalog, spec.name, k))
        else:
            out.append(categorical_bin(catalog, spec.name))
    return out


@dataclass(frozen=True, eq=False)
class CalibratedWeights:
    """Raked per-record sampling weights plus convergence diagnostics.

    Weights are nonnegative and sum to 1. ``max_marginal_deviation`` is
    the L1 distance of the worst attribute's weighted marginal from its
    uniform target, measured after the last completed cycle.
    """

    weight: np.ndarray
    iterations_used: int
    max_marginal_deviation: float
    converged: bool
    deviation_per_attribute: dict[str, float]


def _marginal_deviation(weights: np.ndarray, assignment: BinAssignment) -> float:
    mass = np.bincount(assignment.bin_of_record, weights=weights, minlength=assignment.n_bins)
    nonempty = np.bincount(assignment.bin_of_record, minlength=assignment.n_bins) > 0
    target = 1.0 / nonempty.sum()
    return float(np.abs(mass[nonempty] - target).sum())


def rake(
    bins: Sequence[BinAssignment],
    tolerance: float = 1e-6,
    max_iterations: int = 1000,
) -> CalibratedWeights:
    """Iterative proportional fitting toward uniform marginals.

    Cycles attributes in the given order; each pass multiplies every
    record's weight by (target bin mass) / (current weighted bin mass)
    for its bin. Stops when the worst attribute's L1 deviation from
    uniform is within ``tolerance``, or after ``max_iterations`` cycles
    with ``converged=False``.
    """
    if not bins:
        raise GeoscaleError("raking requires at least one binned attribute")
    n = len(bins[0].bin_of_record)
    for b in bins:
        if len(b.bin_of_record) != n:
            raise GeoscaleError("bin assignments cover different record counts")
        if np.any(b.bin_of_record < 0) or np.any(b.bin_of_record >= max(b.n_bins, 1)):
            raise GeoscaleError(f"attribute {b.attribute!r}: record assigned to no bin")

    occupancy = [np.bincount(b.bin_of_record, minlength=b.n_bins) > 0 for b in bins]
    targets = [1.0 / occ.sum() for occ in occupancy]

    w = np.full(n, 1.0 / n)
    iterations = 0
    converged = False
    per_attr: dict[str, float] = {}
    while iterations < max_iterations:
        for b, occ, target in zip(bins, occupancy, targets):
            mass = np.bincount(b.bin_of_record, weights=w, minlength=b.n_bins)
            factor = np.ones(max(b.n_bins, 1))
            factor[occ] = target / mass[occ]
            w = w * factor[b.bin_of_record]
        iterations += 1
        if not np.isfinite(w).all() or w.sum() <= 0.0:
            raise GeoscaleError("raking collapsed all weights to zero")
        per_attr = {b.attribute: _marginal_deviation(w, b) for b in bins}
        worst = max(per_attr.values())
        if worst <= tolerance:
            converged = True
            break
    w = w / w.sum()
    return CalibratedWeights(w, iterations, max(per_attr.values()), converged, per_attr)


def weighted_permutation(weights: CalibratedWeights | np.ndarray, seed: int) -> np.ndarray:
    """Full weighted draw-without-replacement ordering of all records.

    Uses the exponential key construction: key_i = ln(u_i) / w_i with
    u_i ~ U(0,1), sorted descending, which distributes the permutation
    exactly as successive weighted draws without replacement. Ties break
    by record index; zero-weight records follow all positive-weight
    records in index order. Deterministic for a fixed seed.
    """
    w = weights.weight if isinstance(weights, CalibratedWeights) else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise GeoscaleError("weights must be nonnegative")
    positive = w > 0
    if not positive.any():
        raise GeoscaleError("all weights are zero; nothing to sample")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(len(w))
    idx = np.arange(len(w))
    with np.errstate(divide="ignore"):
        keys = np.log(u[positive]) / w[positive]
    pos_idx = idx[positive]
    order_pos = pos_idx[np.lexsort((pos_idx, -keys))]
    return np.concatenate([order_pos, idx[~positive]])


@dataclass(frozen=True, eq=False)
class SubsetChain:
    """Nested subsets cut as prefixes of one ordering."""

    ordering: np.ndarray
    sizes: tuple[int, ...]
    subsets: tuple[frozenset, ...]


def nested_subsets(ordering: np.ndarray | Sequence[int], sizes: Sequence[int]) -> SubsetChain:
    """Prefix subsets of ``ordering`` at each requested size.

    Sizes must be strictly ascending and bounded by the ordering length;
    the superset property subsets[i] < subsets[i+1] holds by construction.
    """
    ordering = np.asarray(ordering)
    sizes = tuple(int(s) for s in sizes)
    if not sizes:
        raise GeoscaleError("at least one subset size is required")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise GeoscaleError(f"sizes must be strictly ascending, got {sizes}")
    if sizes[0] < 1:
        raise GeoscaleError("subset sizes must be positive")
    if sizes[-1] > len(ordering):
        raise GeoscaleError(f"size {sizes[-1]} exceeds catalog size {len(ordering)}")
    subsets = tuple(frozenset(ordering[:s].tolist()) for s in sizes)
    return SubsetChain(ordering, sizes, subsets)
