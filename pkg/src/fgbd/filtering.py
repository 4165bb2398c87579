"""Vertex-domain low-pass filtering and power-matched filter selection.

The smoothing operator is the random-walk matrix of the self-looped
adjacency: one step replaces each value with the half-and-half blend of
itself and the weighted neighbor average. The iteration count q is chosen
so the signal power removed by filtering matches the estimated noise power,
optionally restricted to points whose local color variance stays near the
noise level (high-variance points would masquerade as removable power).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .cloud import PointCloud
from .graph import Graph, apply_gaussian_weights, build_slg, compute_sigma_g
from .noise import NoiseEstimate, PatchSet, estimate_noise_from_patches, extract_patches


class FilterError(ValueError):
    """Filtering or selection cannot proceed."""


class AllPointsExcludedError(FilterError):
    """Every point was masked out; fall back to unmasked selection."""


@dataclass(frozen=True)
class FilterConfig:
    """Knobs for filter selection and the denoise pipeline.

    epsilon is only a reporting threshold (the selection minimizes over
    integer q; it does not stop at epsilon). None means 1e-3 * sigma_est^2.
    """

    q_max: int = 64
    epsilon: float | None = None
    fslr_enabled: bool = True
    patch_size: int = 7
    reestimate_interval: int = 10
    fslr_sigma_floor: float = 0.5
    criterion_mode: str = "pooled"   # or "per_channel"
    early_exit: bool = True
    tau_divisor: str = "count"       # or "count_plus_one"

    def __post_init__(self):
        if self.q_max < 0:
            raise FilterError(f"q_max must be >= 0, got {self.q_max}")
        if self.reestimate_interval < 1:
            raise FilterError(f"reestimate_interval must be >= 1, got {self.reestimate_interval}")
        if self.patch_size < 2:
            raise FilterError(f"patch_size must be >= 2, got {self.patch_size}")
        if self.criterion_mode not in ("pooled", "per_channel"):
            raise FilterError(f"unknown criterion_mode {self.criterion_mode!r}")


@dataclass(frozen=True)
class FslrMask:
    """Boolean inclusion mask over all points of a cloud."""

    include: np.ndarray

    def __post_init__(self):
        inc = np.ascontiguousarray(np.asarray(self.include, bool))
        inc.flags.writeable = False
        object.__setattr__(self, "include", inc)

    @property
    def included_count(self) -> int:
        return int(self.include.sum())

    @property
    def n_points(self) -> int:
        return self.include.shape[0]

    @classmethod
    def all_points(cls, n: int) -> "FslrMask":
        return cls(np.ones(n, bool))


@dataclass
class DenoiseReport:
    """Outcome summary of one denoise run."""

    selected_q: int
    sigma_est: float
    masked_fraction: float
    stage_timings: dict[str, float] = field(default_factory=dict)
    psnr_db: float | None = None
    criterion_value: float | None = None
    converged: bool | None = None
    cached: bool = False
    eligible_count: int | None = None

    def to_dict(self) -> dict:
        out = {
            "selected_q": self.selected_q,
            "sigma_est": self.sigma_est,
            "masked_fraction": self.masked_fraction,
            "stage_timings": {k: v for k, v in self.stage_timings.items()},
            "cached": self.cached,
        }
        if self.psnr_db is not None:
            out["psnr_db"] = self.psnr_db
        if self.criterion_value is not None:
            out["criterion_value"] = self.criterion_value
        if self.converged is not None:
            out["converged"] = self.converged
        if self.eligible_count is not None:
            out["eligible_count"] = self.eligible_count
        return out


def _weighted_operator(g: Graph):
    """Cached (W, d) pair for the weighted adjacency matvec."""
    cached = g.__dict__.get("_op_cache")
    if cached is None:
        w = sparse.csr_matrix(
            (g.csr_weights(), g.indices, g.indptr), shape=(g.n, g.n)
        )
        d = g.weighted_degrees()
        cached = (w, d)
        object.__setattr__(g, "_op_cache", cached)
    return cached


def filter_step(g: Graph, signal: np.ndarray) -> np.ndarray:
    """One smoothing step: out_i = (d_i f_i + sum_j w_ij f_j) / (2 d_i).

    Row-stochastic, so constants are preserved and every output lies within
    the input range per channel. Vertices with zero degree pass through.
    Accepts (N,) or (N, C) signals, applied channelwise.
    """
    if not g.is_weighted:
        raise FilterError("filter_step requires a weighted graph")
    f = np.asarray(signal, np.float64)
    flat = f.ndim == 1
    if flat:
        f = f[:, None]
    if f.shape[0] != g.n:
        raise FilterError(f"signal has {f.shape[0]} rows for a {g.n}-vertex graph")
    w, d = _weighted_operator(g)
    neigh = w @ f
    dcol = d[:, None]
    with np.errstate(invalid="ignore"):
        out = (dcol * f + neigh) / (2.0 * dcol)
    isolated = d == 0.0
    if isolated.any():
        out[isolated] = f[isolated]
    return out[:, 0] if flat else out


def apply_filter(g: Graph, signal: np.ndarray, q: int) -> np.ndarray:
    """q repeated filter steps (q = 0 returns the input unchanged)."""
    if q < 0:
        raise FilterError(f"q must be >= 0, got {q}")
    out = np.asarray(signal, np.float64)
    for _ in range(q):
        out = filter_step(g, out)
    return out


def spectral_response(lam, q: int):
    """Frequency response (1 - lambda/2)^q of q filter steps."""
    if q < 0:
        raise FilterError(f"q must be >= 0, got {q}")
    return (1.0 - np.asarray(lam, np.float64) / 2.0) ** q


def fslr_mask(patches: PatchSet, sigma_est: float,
              sigma_floor: float = 0.5) -> FslrMask:
    """Exclude points whose mean per-channel patch deviation exceeds 2 sigma.

    Points without patches (too few neighbors) stay included. Below
    ``sigma_floor`` the mask is disabled entirely: with sigma_est near zero
    the threshold would reject any textured point.
    """
    n = patches.n_points
    if sigma_est < sigma_floor:
        return FslrMask.all_points(n)
    stds = patches.vectors.std(axis=2).mean(axis=0)  # (eligible,)
    include = np.ones(n, bool)
    include[patches.point_index[stds > 2.0 * sigma_est]] = False
    if not include.any():
        raise AllPointsExcludedError(
            "the variance threshold excluded every point; fall back to "
            "unmasked selection (disable the mask or raise sigma_floor)"
        )
    return FslrMask(include)


def selection_criterion(y: np.ndarray, x_q: np.ndarray, mask: FslrMask,
                        sigma_est: float, mode: str = "pooled") -> float:
    """Absolute gap between noise power and per-entry power lost to filtering.

    Sums run over included points and all channels of the raw signals;
    "per_channel" averages the per-channel gaps instead of pooling.
    """
    y = np.asarray(y, np.float64)
    x = np.asarray(x_q, np.float64)
    if y.ndim == 1:
        y = y[:, None]
        x = x[:, None]
    if y.shape != x.shape:
        raise FilterError(f"signal shapes differ: {y.shape} vs {x.shape}")
    count = mask.included_count
    if count < 1:
        raise FilterError("criterion needs at least one included point")
    inc = mask.include
    sv2 = float(sigma_est) ** 2
    if mode == "pooled":
        lost = (np.sum(y[inc] ** 2) - np.sum(x[inc] ** 2)) / (count * y.shape[1])
        return float(abs(sv2 - lost))
    if mode == "per_channel":
        lost = (np.sum(y[inc] ** 2, axis=0) - np.sum(x[inc] ** 2, axis=0)) / count
        return float(np.mean(np.abs(sv2 - lost)))
    raise FilterError(f"unknown criterion mode {mode!r}")


def select_q(pc_noisy: PointCloud, g: Graph, sigma_est: float, cfg: FilterConfig,
             mask: FslrMask | None = None) -> tuple[int, np.ndarray]:
    """Pick the integer iteration count whose power loss best matches the noise.

    Scans q = 0..q_max, reusing each filtered signal as the next input, and
    keeps the criterion minimizer (ties favor the smaller q). With
    cfg.early_exit the scan stops once the criterion has risen three times
    in a row; the best-so-far answer is retained either way.
    """
    if sigma_est < 0:
        raise FilterError(f"sigma_est must be >= 0, got {sigma_est}")
    y = pc_noisy.colors
    if mask is None:
        mask = FslrMask.all_points(pc_noisy.n_points)
    x = y.copy()
    best_q = 0
    best_crit = selection_criterion(y, x, mask, sigma_est, cfg.criterion_mode)
    best_x = x.copy()
    prev = best_crit
    streak = 0
    for q in range(1, cfg.q_max + 1):
        if best_crit == 0.0:
            break
        x = filter_step(g, x)
        crit = selection_criterion(y, x, mask, sigma_est, cfg.criterion_mode)
        if crit < best_crit:
            best_q, best_crit, best_x = q, crit, x.copy()
        streak = streak + 1 if crit > prev else 0
        prev = crit
        if cfg.early_exit and streak >= 3:
            break
    return best_q, best_x


def denoise(pc_noisy: PointCloud, cfg: FilterConfig = FilterConfig(),
            cached_q: int | None = None,
            cached_sigma_est: float | None = None) -> tuple[PointCloud, DenoiseReport]:
    """Full pipeline: scan-line graph, noise estimate, filter choice, filtering.

    With ``cached_q`` the estimation and selection stages are skipped and q
    filter steps run directly (frame-sequence reuse); the report is then
    marked cached and carries ``cached_sigma_est`` when supplied. Geometry is
    never modified.
    """
    if pc_noisy.n_points < 2:
        report = DenoiseReport(
            selected_q=0, sigma_est=0.0, masked_fraction=0.0,
            stage_timings={"graph_construction": 0.0, "noise_estimation": 0.0,
                           "low_pass_filter": 0.0},
        )
        return pc_noisy, report

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    g = build_slg(pc_noisy)
    g = apply_gaussian_weights(g, compute_sigma_g(pc_noisy, g))
    timings["graph_construction"] = time.perf_counter() - t0

    if cached_q is None:
        t0 = time.perf_counter()
        patches = extract_patches(pc_noisy, g, cfg.patch_size)
        est: NoiseEstimate = estimate_noise_from_patches(patches, cfg.tau_divisor)
        sigma_est = est.sigma_est
        if cfg.fslr_enabled:
            try:
                mask = fslr_mask(patches, sigma_est, cfg.fslr_sigma_floor)
            except AllPointsExcludedError:
                warnings.warn("variance mask excluded every point; selecting unmasked")
                mask = FslrMask.all_points(pc_noisy.n_points)
        else:
            mask = FslrMask.all_points(pc_noisy.n_points)
        timings["noise_estimation"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        q, x = select_q(pc_noisy, g, sigma_est, cfg, mask)
        timings["low_pass_filter"] = time.perf_counter() - t0

        crit = selection_criterion(pc_noisy.colors, x, mask, sigma_est, cfg.criterion_mode)
        eps = cfg.epsilon if cfg.epsilon is not None else 1e-3 * sigma_est**2
        report = DenoiseReport(
            selected_q=q,
            sigma_est=sigma_est,
            masked_fraction=1.0 - mask.included_count / pc_noisy.n_points,
            stage_timings=timings,
            criterion_value=crit,
            converged=bool(crit <= eps),
            eligible_count=est.eligible_count,
        )
    else:
        if cached_q < 0:
            raise FilterError(f"cached_q must be >= 0, got {cached_q}")
        timings["noise_estimation"] = 0.0
        t0 = time.perf_counter()
        x = apply_filter(g, pc_noisy.colors, cached_q)
        timings["low_pass_filter"] = time.perf_counter() - t0
        report = DenoiseReport(
            selected_q=int(cached_q),
            sigma_est=float(cached_sigma_est) if cached_sigma_est is not None else 0.0,
            masked_fraction=0.0,
            stage_timings=timings,
            cached=True,
        )
    out = pc_noisy.with_colors(np.clip(x, 0.0, 255.0))
    return out, report
