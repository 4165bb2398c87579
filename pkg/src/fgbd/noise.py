"""Noise level estimation from eigenvalues of graph-patch covariance.

Each point with enough neighbors contributes one fixed-length patch vector
per color channel: its own value first, then neighbor values in ascending
distance order. The smallest eigenvalues of the patch covariance are read
as the noise floor, and sigma_est is the square root of their mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cloud import PointCloud, _readonly
from .graph import Graph

CHANNEL_NAMES = ("R", "G", "B")

JACOBI_MAX_SWEEPS = 50
SYMMETRY_RTOL = 1e-9
OFFDIAG_RTOL = 1e-12


class NoiseEstimationError(ValueError):
    """Patch construction or estimation cannot proceed."""


@dataclass(frozen=True)
class PatchSet:
    """Distance-sorted patch vectors, one (eligible_count, D) matrix per channel."""

    vectors: np.ndarray      # (3, eligible, D)
    point_index: np.ndarray  # (eligible,) source point ids
    patch_size: int
    n_points: int

    def __post_init__(self):
        object.__setattr__(self, "vectors", _readonly(np.asarray(self.vectors, np.float64)))
        object.__setattr__(self, "point_index", _readonly(np.asarray(self.point_index, np.int64)))

    @property
    def eligible_count(self) -> int:
        return self.point_index.shape[0]

    def channel(self, c) -> np.ndarray:
        return self.vectors[_channel_index(c)]


def _channel_index(c) -> int:
    if isinstance(c, str):
        try:
            return CHANNEL_NAMES.index(c.upper())
        except ValueError:
            raise NoiseEstimationError(f"unknown channel {c!r}") from None
    c = int(c)
    if not 0 <= c <= 2:
        raise NoiseEstimationError(f"channel index must be 0..2, got {c}")
    return c


@dataclass(frozen=True)
class NoiseEstimate:
    """Pooled and per-channel noise sigma plus eigenvalue diagnostics."""

    sigma_est: float
    per_channel_sigma: np.ndarray  # (3,)
    eigenvalues: np.ndarray        # (3, D) descending
    m: np.ndarray                  # (3,) tail-start index per channel
    tau: np.ndarray                # (3,) tail eigenvalue mean
    fallback: np.ndarray           # (3,) True where the tail rule never held
    eligible_count: int


class TailSelection(NamedTuple):
    m: int
    tau: float
    fallback: bool


def extract_patches(pc: PointCloud, g: Graph, patch_size: int) -> PatchSet:
    """Build one D-entry patch per channel for every point with >= D-1 neighbors.

    Entry 0 is the query point's value; the remaining D-1 entries are the
    nearest neighbors by Euclidean distance, ties broken by point index
    (neighbor lists are index-sorted and the distance sort is stable).
    """
    d = int(patch_size)
    if d < 2:
        raise NoiseEstimationError(f"patch_size must be >= 2, got {patch_size}")
    degrees = g.degrees()
    max_deg = int(degrees.max(initial=0))
    if d > 1 + max_deg:
        raise NoiseEstimationError(
            f"patch_size {d} exceeds 1 + max degree ({1 + max_deg}) of this graph"
        )
    eligible = np.nonzero(degrees >= d - 1)[0]
    ne = eligible.size
    slot_dist = g.edge_sqdist[g.csr_edge]

    lengths = degrees[eligible]
    starts = g.indptr[eligible]
    cols = np.arange(max_deg, dtype=np.int64)[None, :]
    mask = cols < lengths[:, None]
    flat = starts[:, None] + cols
    idx_pad = np.full((ne, max_deg), -1, np.int64)
    dist_pad = np.full((ne, max_deg), np.inf)
    idx_pad[mask] = g.indices[flat[mask]]
    dist_pad[mask] = slot_dist[flat[mask]]

    order = np.argsort(dist_pad, axis=1, kind="stable")[:, : d - 1]
    neigh = np.take_along_axis(idx_pad, order, axis=1)

    vectors = np.empty((3, ne, d))
    for c in range(3):
        vectors[c, :, 0] = pc.colors[eligible, c]
        vectors[c, :, 1:] = pc.colors[:, c][neigh]
    return PatchSet(vectors, eligible, d, pc.n_points)


def patch_covariance(patches: PatchSet, channel) -> np.ndarray:
    """Population covariance (divisor = eligible_count) of one channel's patches."""
    x = patches.channel(channel)
    ne = x.shape[0]
    if ne < 2:
        raise NoiseEstimationError(f"need at least 2 patches, have {ne}")
    xc = x - x.mean(axis=0)
    cov = (xc.T @ xc) / ne
    return (cov + cov.T) * 0.5


def symmetric_eigenvalues(s: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.

    Converges when the off-diagonal Frobenius norm drops below 1e-12 of the
    matrix norm; a sweep cap of 50 is a reported failure.
    """
    s = np.asarray(s, np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise NoiseEstimationError(f"matrix must be square, got {s.shape}")
    scale = np.abs(s).max()
    if scale > 0 and np.abs(s - s.T).max() > SYMMETRY_RTOL * scale:
        raise NoiseEstimationError("matrix is not symmetric within tolerance")
    a = np.array((s + s.T) * 0.5)
    n = a.shape[0]
    norm = np.linalg.norm(a)
    if norm == 0.0 or n == 1:
        return np.sort(np.diag(a))[::-1]
    target = OFFDIAG_RTOL * norm
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= target:
            return np.sort(np.diag(a))[::-1]
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-36 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                    if t == 0.0:
                        t = 1.0  # theta == 0: rotate by 45 degrees
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
    off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
    if off <= target:
        return np.sort(np.diag(a))[::-1]
    raise NoiseEstimationError(
        f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal {off:.3e})"
    )


def select_tail(eigenvalues: np.ndarray, divisor: str = "count") -> TailSelection:
    """Pick the tail of the spectrum attributed to noise.

    Scans m upward from 1 and returns the smallest m whose tail
    {lambda_(m+1) .. lambda_D} has tau > median(tail). ``divisor`` chooses
    the tau normalization: "count" divides the tail sum by D-m (true mean),
    "count_plus_one" by D-m+1. When no m <= D-2 qualifies, falls back to
    m = D // 2 with the fallback flag set.
    """
    lam = np.asarray(eigenvalues, np.float64)
    d = lam.size
    if d < 3:
        raise NoiseEstimationError(f"need at least 3 eigenvalues, got {d}")
    scale = max(np.abs(lam).max(), 1.0)
    if np.any(np.diff(lam) > 1e-9 * scale):
        raise NoiseEstimationError("eigenvalues must be sorted descending")
    if divisor not in ("count", "count_plus_one"):
        raise NoiseEstimationError(f"unknown divisor rule {divisor!r}")
    extra = 0 if divisor == "count" else 1

    for m in range(1, d - 1):
        tail = lam[m:]
        tau = float(tail.sum() / (tail.size + extra))
        if tau > float(np.median(tail)):
            return TailSelection(m, tau, False)
    m = d // 2
    tail = lam[m:]
    tau = float(tail.sum() / (tail.size + extra))
    return TailSelection(m, tau, True)


def estimate_noise_from_patches(patches: PatchSet, divisor: str = "count") -> NoiseEstimate:
    """Per-channel covariance -> eigenvalues -> tail mean -> sigma, then pool."""
    d = patches.patch_size
    eigenvalues = np.empty((3, d))
    sigmas = np.empty(3)
    ms = np.empty(3, np.int64)
    taus = np.empty(3)
    fallbacks = np.empty(3, bool)
    for c in range(3):
        lam = symmetric_eigenvalues(patch_covariance(patches, c))
        sel = select_tail(lam, divisor=divisor)
        eigenvalues[c] = lam
        ms[c] = sel.m
        taus[c] = sel.tau
        fallbacks[c] = sel.fallback
        sigmas[c] = np.sqrt(max(sel.tau, 0.0))
    return NoiseEstimate(
        sigma_est=float(sigmas.mean()),
        per_channel_sigma=sigmas,
        eigenvalues=eigenvalues,
        m=ms,
        tau=taus,
        fallback=fallbacks,
        eligible_count=patches.eligible_count,
    )


def estimate_noise(pc: PointCloud, g: Graph, patch_size: int = 7,
                   divisor: str = "count") -> NoiseEstimate:
    """Full estimation pass: patches from the graph, then the eigenvalue rule."""
    return estimate_noise_from_patches(extract_patches(pc, g, patch_size), divisor)
