"""Point cloud data model, coordinate quantization, noise injection and PSNR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PSNR_CAP_DB = 100.0
MAX_BIT_DEPTH = 21


class CloudError(ValueError):
    """Invalid point cloud data or incompatible cloud pair."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PointCloud:
    """N points with coordinates and RGB color attributes.

    ``coords`` is (N, 3). Quantized clouds hold nonnegative integers on a
    2^bit_depth voxel grid; clouds loaded from float sources keep float
    coordinates and ``bit_depth is None`` until quantize_coordinates runs.
    ``colors`` is (N, 3) float in [0, 255]; rounding to 8-bit integers only
    happens when a cloud is serialized.
    """

    coords: np.ndarray
    colors: np.ndarray
    bit_depth: int | None = field(default=None)

    def __post_init__(self):
        coords = np.asarray(self.coords)
        colors = np.asarray(self.colors, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise CloudError(f"coords must be (N, 3), got {coords.shape}")
        if colors.shape != coords.shape:
            raise CloudError(
                f"colors shape {colors.shape} does not match coords {coords.shape}"
            )
        if coords.shape[0] < 1:
            raise CloudError("point cloud must contain at least one point")
        if not np.all(np.isfinite(colors)):
            raise CloudError("colors must be finite")
        if colors.min() < 0.0 or colors.max() > 255.0:
            raise CloudError("colors must lie in [0, 255]")
        if self.bit_depth is not None:
            b = int(self.bit_depth)
            if not 1 <= b <= MAX_BIT_DEPTH:
                raise CloudError(f"bit_depth must be in [1, {MAX_BIT_DEPTH}], got {b}")
            if not np.issubdtype(coords.dtype, np.integer):
                raise CloudError("quantized cloud requires integer coordinates")
            coords = coords.astype(np.int64)
            if coords.min() < 0 or coords.max() >= (1 << b):
                raise CloudError(f"coordinates out of range for bit_depth={b}")
        else:
            coords = coords.astype(np.float64)
        object.__setattr__(self, "coords", _readonly(coords))
        object.__setattr__(self, "colors", _readonly(colors))

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def is_quantized(self) -> bool:
        return self.bit_depth is not None

    def __len__(self) -> int:
        return self.n_points

    def with_colors(self, colors: np.ndarray) -> "PointCloud":
        """Same geometry, new color attributes."""
        return PointCloud(self.coords, colors, self.bit_depth)


def infer_bit_depth(coords: np.ndarray) -> int:
    """Smallest b with every coordinate < 2^b (at least 1)."""
    m = int(np.asarray(coords).max(initial=0))
    return max(1, m.bit_length())


def quantize_coordinates(pc: PointCloud, bits: int) -> PointCloud:
    """Affinely map each coordinate axis onto the integer range [0, 2^bits - 1].

    Per axis, [min, max] maps linearly onto the grid and values round to the
    nearest integer. A degenerate axis (max == min) maps to 0. Clouds that
    already carry integer coordinates inside the range pass through with only
    the bit depth updated.
    """
    b = int(bits)
    if not 1 <= b <= MAX_BIT_DEPTH:
        raise CloudError(f"bits must be in [1, {MAX_BIT_DEPTH}], got {bits}")
    coords = pc.coords
    if np.issubdtype(coords.dtype, np.integer) and coords.min() >= 0 and coords.max() < (1 << b):
        return PointCloud(coords, pc.colors, b)
    lo = coords.min(axis=0).astype(np.float64)
    hi = coords.max(axis=0).astype(np.float64)
    span = hi - lo
    scale = np.where(span > 0, ((1 << b) - 1) / np.where(span > 0, span, 1.0), 0.0)
    q = np.rint((coords - lo) * scale).astype(np.int64)
    return PointCloud(q, pc.colors, b)


def add_gaussian_noise(pc: PointCloud, sigma: float, seed: int = 0) -> PointCloud:
    """Perturb every color component by N(0, sigma^2), clipped to [0, 255].

    Geometry is untouched. The Philox counter-based generator makes the output
    a pure function of (pc, sigma, seed), independent of thread scheduling.
    """
    if sigma < 0:
        raise CloudError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return pc
    rng = np.random.Generator(np.random.Philox(int(seed)))
    noisy = pc.colors + rng.normal(0.0, sigma, size=pc.colors.shape)
    return pc.with_colors(np.clip(noisy, 0.0, 255.0))


def psnr(reference: PointCloud, test: PointCloud, cap_db: float = PSNR_CAP_DB) -> float:
    """PSNR in dB between two clouds with identical point order.

    10*log10(255^2 / MSE) with the MSE pooled over all 3N channel values;
    returns ``cap_db`` when the MSE is zero.
    """
    if reference.n_points != test.n_points:
        raise CloudError(
            f"size mismatch: {reference.n_points} vs {test.n_points} points"
        )
    diff = reference.colors - test.colors
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return float(cap_db)
    return float(10.0 * np.log10(255.0**2 / mse))
