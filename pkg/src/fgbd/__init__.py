"""Fast graph-based denoising of point-cloud color attributes.

Pipeline: scan-line graph construction, eigenvalue-based noise estimation on
graph patches, power-matched selection of a random-walk low-pass filter, and
vertex-domain filtering of the color signal.
"""

__version__ = "0.1.0"

from .cloud import (
    CloudError,
    PointCloud,
    add_gaussian_noise,
    infer_bit_depth,
    psnr,
    quantize_coordinates,
)
from .filtering import (
    AllPointsExcludedError,
    DenoiseReport,
    FilterConfig,
    FilterError,
    FslrMask,
    apply_filter,
    denoise,
    filter_step,
    fslr_mask,
    select_q,
    selection_criterion,
    spectral_response,
)
from .graph import (
    Graph,
    GraphError,
    ScanLineCodes,
    apply_gaussian_weights,
    build_knn_brute,
    build_slg,
    build_weighted_slg,
    compute_sigma_g,
    radix_argsort,
    scanline_codes,
    sort_permutation,
)
from .manifest import RunManifest
from .noise import (
    NoiseEstimate,
    NoiseEstimationError,
    PatchSet,
    estimate_noise,
    estimate_noise_from_patches,
    extract_patches,
    patch_covariance,
    select_tail,
    symmetric_eigenvalues,
)
from .ply import PlyError, PlyParseError, load_ply, save_ply, write_ply
from .synth import generate_cloud

__all__ = [
    "AllPointsExcludedError",
    "CloudError",
    "DenoiseReport",
    "FilterConfig",
    "FilterError",
    "FslrMask",
    "Graph",
    "GraphError",
    "NoiseEstimate",
    "NoiseEstimationError",
    "PatchSet",
    "PlyError",
    "PlyParseError",
    "PointCloud",
    "RunManifest",
    "ScanLineCodes",
    "add_gaussian_noise",
    "apply_filter",
    "apply_gaussian_weights",
    "build_knn_brute",
    "build_slg",
    "build_weighted_slg",
    "compute_sigma_g",
    "denoise",
    "estimate_noise",
    "estimate_noise_from_patches",
    "extract_patches",
    "filter_step",
    "fslr_mask",
    "generate_cloud",
    "infer_bit_depth",
    "load_ply",
    "patch_covariance",
    "psnr",
    "quantize_coordinates",
    "radix_argsort",
    "save_ply",
    "scanline_codes",
    "select_q",
    "select_tail",
    "selection_criterion",
    "sort_permutation",
    "spectral_response",
    "symmetric_eigenvalues",
    "write_ply",
]
