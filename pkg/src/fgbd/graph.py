"""Scan-line graph construction plus a brute-force kNN baseline.

The fast path sorts points along three axis-permuted raster-scan codes and
connects rank-consecutive points, so connectivity costs three radix sorts
instead of a nearest-neighbor search. Eq-style Gaussian weights are applied
afterwards from a single global distance scale.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .cloud import MAX_BIT_DEPTH, PointCloud, _readonly


class GraphError(ValueError):
    """Invalid graph construction input or degenerate graph."""


# line index -> (high, mid, low) coordinate axis of the code word
_LINE_AXES = {1: (2, 1, 0), 2: (0, 2, 1), 3: (1, 0, 2)}


@dataclass(frozen=True)
class ScanLineCodes:
    """One 3b-bit raster-scan code per point for a single scan line."""

    codes: np.ndarray
    line: int
    bit_depth: int

    def __post_init__(self):
        object.__setattr__(self, "codes", _readonly(np.asarray(self.codes, np.uint64)))


@dataclass(frozen=True)
class Graph:
    """Compressed symmetric adjacency with optional Gaussian edge weights.

    ``indptr``/``indices`` form a CSR view with neighbor lists sorted by
    index; ``csr_edge`` maps each CSR slot to its unique undirected edge.
    Unique edges satisfy edge_u < edge_v and are sorted lexicographically.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    csr_edge: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_sqdist: np.ndarray
    sigma_g: float | None = None
    edge_weights: np.ndarray | None = None

    def __post_init__(self):
        for name in ("indptr", "indices", "csr_edge", "edge_u", "edge_v"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), np.int64)))
        object.__setattr__(self, "edge_sqdist", _readonly(np.asarray(self.edge_sqdist, np.float64)))
        if self.edge_weights is not None:
            object.__setattr__(self, "edge_weights", _readonly(np.asarray(self.edge_weights, np.float64)))

    @property
    def n_edges(self) -> int:
        return self.edge_u.shape[0]

    @property
    def is_weighted(self) -> bool:
        return self.edge_weights is not None

    def degrees(self) -> np.ndarray:
        """Structural degree per vertex."""
        return np.diff(self.indptr)

    def weighted_degrees(self) -> np.ndarray:
        """Sum of incident edge weights per vertex."""
        if self.edge_weights is None:
            raise GraphError("graph has no weights; run apply_gaussian_weights first")
        return (
            np.bincount(self.edge_u, weights=self.edge_weights, minlength=self.n)
            + np.bincount(self.edge_v, weights=self.edge_weights, minlength=self.n)
        )

    def csr_weights(self) -> np.ndarray:
        if self.edge_weights is None:
            raise GraphError("graph has no weights; run apply_gaussian_weights first")
        return self.edge_weights[self.csr_edge]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.edge_u.tolist(), self.edge_v.tolist()))

    def edge_list_text(self) -> str:
        """Debug dump: one "i j w" line per unique edge, ascending (i, j)."""
        w = self.edge_weights
        if w is None:
            w = np.ones(self.n_edges)
        lines = [
            f"{u} {v} {repr(float(wi))}"
            for u, v, wi in zip(self.edge_u.tolist(), self.edge_v.tolist(), w.tolist())
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def _require_quantized(pc: PointCloud) -> int:
    if not pc.is_quantized:
        raise GraphError(
            "graph construction requires integer voxel coordinates; "
            "run quantize_coordinates first"
        )
    b = int(pc.bit_depth)
    if b > MAX_BIT_DEPTH:
        raise GraphError(f"bit depth {b} exceeds {MAX_BIT_DEPTH} (64-bit code overflow)")
    return b


def scanline_codes(pc: PointCloud, line: int) -> ScanLineCodes:
    """Raster-scan code per point for scan line 1, 2 or 3.

    Line 1 packs (z, y, x) high-to-low, line 2 (x, z, y), line 3 (y, x, z),
    so sorting the codes orders points lexicographically along that scan.
    """
    b = _require_quantized(pc)
    if line not in _LINE_AXES:
        raise GraphError(f"line must be 1, 2 or 3, got {line}")
    hi, mid, lo = _LINE_AXES[line]
    g = pc.coords.astype(np.uint64)
    codes = (
        (g[:, hi] << np.uint64(2 * b)) | (g[:, mid] << np.uint64(b)) | g[:, lo]
    )
    return ScanLineCodes(codes, line, b)


@njit(cache=True)
def _counting_pass(keys, order_in, order_out, shift):  # pragma: no cover
    counts = np.zeros(257, np.int64)
    n = order_in.size
    for i in range(n):
        d = (keys[order_in[i]] >> shift) & np.uint64(0xFF)
        counts[d + 1] += 1
    for d in range(256):
        counts[d + 1] += counts[d]
    for i in range(n):
        d = (keys[order_in[i]] >> shift) & np.uint64(0xFF)
        order_out[counts[d]] = order_in[i]
        counts[d] += 1


def radix_argsort(keys: np.ndarray, key_bits: int = 64) -> np.ndarray:
    """Stable argsort of unsigned integer keys via LSD radix, 8 bits per pass.

    Only ceil(key_bits / 8) passes run, skipping always-zero high bytes.
    Equal keys keep their input order.
    """
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    if not 1 <= key_bits <= 64:
        raise ValueError(f"key_bits must be in [1, 64], got {key_bits}")
    n = keys.size
    order = np.arange(n, dtype=np.int64)
    if n < 2:
        return order
    buf = np.empty_like(order)
    for shift in range(0, key_bits, 8):
        _counting_pass(keys, order, buf, np.uint64(shift))
        order, buf = buf, order
    return order


def sort_permutation(codes: ScanLineCodes) -> np.ndarray:
    """Stable rank order of the points under one scan-line code."""
    return radix_argsort(codes.codes, key_bits=3 * codes.bit_depth)


def _graph_from_pairs(pc: PointCloud, pairs_u: np.ndarray, pairs_v: np.ndarray) -> Graph:
    """Dedup undirected pairs and assemble the CSR + unique-edge structure."""
    n = pc.n_points
    if n >= 2**31:
        raise GraphError("point count exceeds the 2^31 edge-encoding limit")
    if pairs_u.size == 0:
        empty = np.empty(0, np.int64)
        return Graph(n, np.zeros(n + 1, np.int64), empty, empty, empty, empty,
                     np.empty(0, np.float64))
    lo = np.minimum(pairs_u, pairs_v).astype(np.uint64)
    hi = np.maximum(pairs_u, pairs_v).astype(np.uint64)
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    key = lo * np.uint64(n) + hi
    key = np.unique(key)
    edge_u = (key // np.uint64(n)).astype(np.int64)
    edge_v = (key % np.uint64(n)).astype(np.int64)

    g = pc.coords.astype(np.float64)
    diff = g[edge_u] - g[edge_v]
    sqdist = np.einsum("ij,ij->i", diff, diff)

    m = edge_u.size
    src = np.concatenate([edge_u, edge_v])
    dst = np.concatenate([edge_v, edge_u])
    eid = np.concatenate([np.arange(m, dtype=np.int64)] * 2)
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Graph(n, indptr, dst[order], eid[order], edge_u, edge_v, sqdist)


def build_slg(pc: PointCloud) -> Graph:
    """Scan-line graph: rank-consecutive points under each of the three
    scan-line codes become undirected edges; the three scans are unioned
    with duplicates removed, bounding every degree by 6."""
    n = pc.n_points
    _require_quantized(pc)
    if n < 2:
        return _graph_from_pairs(pc, np.empty(0, np.int64), np.empty(0, np.int64))
    us, vs = [], []
    for line in (1, 2, 3):
        perm = sort_permutation(scanline_codes(pc, line))
        us.append(perm[:-1])
        vs.append(perm[1:])
    return _graph_from_pairs(pc, np.concatenate(us), np.concatenate(vs))


def compute_sigma_g(pc: PointCloud, g: Graph) -> float:
    """Mean Euclidean length over all unique undirected edges."""
    if g.n_edges == 0:
        raise GraphError("cannot compute a distance scale on an edgeless graph")
    coords = pc.coords.astype(np.float64)
    diff = coords[g.edge_u] - coords[g.edge_v]
    return float(np.mean(np.sqrt(np.einsum("ij,ij->i", diff, diff))))


def apply_gaussian_weights(g: Graph, sigma_g: float) -> Graph:
    """Weight every edge with exp(-squared_length / sigma_g^2).

    Coincident endpoints get weight 1; scan-wraparound edges many sigma
    long decay to effectively zero, which is what neutralizes them.
    """
    if not sigma_g > 0:
        raise GraphError(f"sigma_g must be positive, got {sigma_g}")
    w = np.exp(-g.edge_sqdist / float(sigma_g) ** 2)
    return dataclasses.replace(g, sigma_g=float(sigma_g), edge_weights=w)


def build_weighted_slg(pc: PointCloud) -> Graph:
    """Scan-line graph with Gaussian weights at the mean-edge-length scale."""
    g = build_slg(pc)
    return apply_gaussian_weights(g, compute_sigma_g(pc, g))


@njit(cache=True, parallel=True)
def _knn_scan(coords, k):  # pragma: no cover
    n = coords.shape[0]
    out = np.empty((n, k), np.int64)
    last = k - 1
    for i in prange(n):
        best_d = np.full(k, np.inf)
        best_j = np.full(k, -1, np.int64)
        xi = coords[i, 0]
        yi = coords[i, 1]
        zi = coords[i, 2]
        for j in range(n):
            if j == i:
                continue
            dx = coords[j, 0] - xi
            dy = coords[j, 1] - yi
            dz = coords[j, 2] - zi
            d2 = dx * dx + dy * dy + dz * dz
            # equal distances lose to the smaller index already stored
            if d2 >= best_d[last]:
                continue
            p = last
            while p > 0 and d2 < best_d[p - 1]:
                best_d[p] = best_d[p - 1]
                best_j[p] = best_j[p - 1]
                p -= 1
            best_d[p] = d2
            best_j[p] = j
        out[i] = best_j
    return out


def build_knn_brute(pc: PointCloud, k: int) -> Graph:
    """Exact k-nearest-neighbor graph by exhaustive distance evaluation.

    Ties are broken by point index, and the directed neighbor sets are
    symmetrized by union. Quadratic cost with no spatial structure; kept as
    the quality and timing baseline for the scan-line construction.
    """
    n = pc.n_points
    if not 1 <= k < n:
        raise GraphError(f"k must satisfy 1 <= k < n_points, got k={k}, n={n}")
    nearest = _knn_scan(pc.coords.astype(np.float64), k)
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    return _graph_from_pairs(pc, src, nearest.reshape(-1))
