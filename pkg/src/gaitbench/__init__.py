"""Benchmark harness for intra-individual gait classification from GRF data."""

import os

# Results must not depend on how many processes share the machine, so the
# linear algebra backend is pinned to one thread before numpy loads. A no-op
# if numpy is already imported with different settings; runs stay internally
# consistent either way.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from .model import (  # noqa: E402
    CombinationSpec,
    FeatureLayout,
    FeatureVector,
    FoldSplit,
    ForceTrial,
    FootChannels,
    MetricsRecord,
    enumerate_combinations,
    parse_spec,
    validate_trial,
)

__version__ = "0.1.0"

__all__ = [
    "CombinationSpec",
    "FeatureLayout",
    "FeatureVector",
    "FoldSplit",
    "ForceTrial",
    "FootChannels",
    "MetricsRecord",
    "enumerate_combinations",
    "parse_spec",
    "validate_trial",
    "__version__",
]
