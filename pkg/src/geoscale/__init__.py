"""geoscale: desk-scale planning and analysis for large-scale
remote-sensing pretraining.

Subpackages cover the full loop: catalog ingestion and stratified
subsampling (quantile binning + raking + weighted non-replacement
sampling with nested subsets), WSD learning-rate schedules with
fail-fast triage, power-law scaling fits with trapped-run exclusion and
dataset-size planning, batch-size tradeoff fits, a weak-label geometry
pipeline for image chips, and a seeded run simulator used as the
verification oracle for all of the above.
"""

from .errors import GeoscaleError, ManifestError

__version__ = "0.1.0"

__all__ = ["GeoscaleError", "ManifestError", "__version__"]
