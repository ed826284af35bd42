"""Quantization of rare-event output distributions with importance-sampling weights."""

from .diagnostics import CentroidStdReport, estimate_cell_masses, std_centroid
from .distributions import (
    BoxUniformParams,
    TruncNormParams,
    box_uniform_pdf,
    sample_box_uniform,
    sample_truncnorm,
    truncnorm_cdf,
    truncnorm_pdf,
    truncnorm_quantile,
)
from .quantizer import (
    Accumulator,
    LloydConfig,
    QuantizationResult,
    SampleBatch,
    accumulate_batch,
    assign_cell,
    finalize_accumulation,
    find_prototypes,
    is_centroids,
    lloyd_once,
)
from .weights import DensityModel, SupportError, compute_density_ratio

__all__ = [
    "Accumulator", "BoxUniformParams", "CentroidStdReport", "DensityModel", "LloydConfig",
    "QuantizationResult", "SampleBatch", "SupportError", "TruncNormParams",
    "accumulate_batch", "assign_cell", "box_uniform_pdf", "compute_density_ratio",
    "estimate_cell_masses", "finalize_accumulation", "find_prototypes", "is_centroids",
    "lloyd_once", "sample_box_uniform", "sample_truncnorm", "std_centroid",
    "truncnorm_cdf", "truncnorm_pdf", "truncnorm_quantile",
]
