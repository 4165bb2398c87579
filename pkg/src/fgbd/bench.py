"""Graph-construction timing comparison: scan-line graph vs brute-force kNN."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graph import build_knn_brute, build_slg
from .synth import generate_cloud

CSV_HEADER = "n,slg_s,bf_knn_s,mean_degree,overlap"


@dataclass
class BenchRow:
    n: int
    slg_s: float
    bf_knn_s: float
    mean_degree: float
    overlap: float

    def csv(self) -> str:
        return (
            f"{self.n},{self.slg_s:.6f},{self.bf_knn_s:.6f},"
            f"{self.mean_degree:.4f},{self.overlap:.4f}"
        )


def _edge_keys(g) -> np.ndarray:
    return g.edge_u.astype(np.uint64) * np.uint64(g.n) + g.edge_v.astype(np.uint64)


def warmup() -> None:
    """Compile/populate hot paths so timed builds measure steady state."""
    pc, _ = generate_cloud("constant", 256, bits=6, seed=12345)
    build_slg(pc)
    build_knn_brute(pc, 3)


def run_graph_bench(sizes, k: int = 6, bits: int = 10, seed: int = 0) -> list[BenchRow]:
    """Time both builders on random voxel clouds of the given sizes.

    ``overlap`` is the fraction of true kNN edges the scan-line graph also
    finds. The first call triggers JIT compilation, so a warmup build runs
    before any timing.
    """
    warmup()
    rows = []
    for i, n in enumerate(sizes):
        pc, _ = generate_cloud("constant", int(n), bits=bits, seed=seed + i)
        t0 = time.perf_counter()
        slg = build_slg(pc)
        slg_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        knn = build_knn_brute(pc, k)
        bf_s = time.perf_counter() - t0
        knn_keys = _edge_keys(knn)
        shared = np.intersect1d(_edge_keys(slg), knn_keys).size
        rows.append(
            BenchRow(
                n=int(n),
                slg_s=slg_s,
                bf_knn_s=bf_s,
                mean_degree=float(slg.degrees().mean()),
                overlap=shared / max(knn_keys.size, 1),
            )
        )
    return rows


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"
