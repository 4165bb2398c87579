"""Deterministic synthetic clouds for experiments and benchmarks."""

from __future__ import annotations

import numpy as np

from .cloud import MAX_BIT_DEPTH, CloudError, PointCloud

KINDS = ("constant", "ramp", "two-tone", "grid")

MID_GRAY = (128.0, 128.0, 128.0)
TONE_A = (192.0, 64.0, 64.0)
TONE_B = (64.0, 64.0, 192.0)


def _lattice(n: int) -> tuple[np.ndarray, int]:
    """First n points of the smallest k^3 raster lattice, plus k."""
    k = 1
    while k**3 < n:
        k += 1
    z, y, x = np.unravel_index(np.arange(n), (k, k, k))
    return np.stack([x, y, z], axis=1).astype(np.int64), k


def generate_cloud(kind: str, n: int, bits: int | None = None,
                   seed: int = 0) -> tuple[PointCloud, np.ndarray | None]:
    """Generate a synthetic cloud; two-tone also returns 0/1 side labels.

    constant: uniform random voxel coordinates, one color everywhere.
    grid:     dense k^3 lattice (n = k^3 gives the full cube), mid-gray.
    ramp:     lattice with colors linear in the coordinates (smooth signal).
    two-tone: lattice split by the plane x = k//2 into two flat colors.
    """
    if n < 1:
        raise CloudError(f"n must be >= 1, got {n}")
    if kind not in KINDS:
        raise CloudError(f"unknown synthetic kind {kind!r}; choose from {KINDS}")

    if kind == "constant":
        b = 10 if bits is None else int(bits)
        if not 1 <= b <= MAX_BIT_DEPTH:
            raise CloudError(f"bits must be in [1, {MAX_BIT_DEPTH}], got {bits}")
        rng = np.random.Generator(np.random.Philox(int(seed)))
        coords = rng.integers(0, 1 << b, size=(n, 3), dtype=np.int64)
        colors = np.tile(MID_GRAY, (n, 1))
        return PointCloud(coords, colors, b), None

    coords, k = _lattice(n)
    b = max(1, (k - 1).bit_length()) if bits is None else int(bits)
    if k > (1 << b):
        raise CloudError(f"lattice of side {k} does not fit in {b} bits")

    if kind == "grid":
        colors = np.tile(MID_GRAY, (n, 1))
        return PointCloud(coords, colors, b), None

    if kind == "ramp":
        # gentle slope: raster wraparound then jumps by at most the full span,
        # which must stay small against the noise levels under study
        span = max(k - 1, 1)
        colors = 120.0 + 16.0 * coords.astype(np.float64) / span
        return PointCloud(coords, colors, b), None

    # two-tone: a tone-B slab between two planar x boundaries, so the raster
    # wraparound seam at x = 0 / k-1 never jumps tones
    lo, hi = k // 3, 2 * k // 3
    labels = ((coords[:, 0] >= lo) & (coords[:, 0] < hi)).astype(np.int64)
    colors = np.where(labels[:, None] == 1, TONE_B, TONE_A).astype(np.float64)
    return PointCloud(coords, colors, b), labels
