"""Command-line surface for the denoising pipeline.

Subcommands: denoise, add-noise, estimate-noise, psnr, gen-synthetic,
bench-graph. Exit codes: 0 success, 2 usage error (argparse), 3 unreadable
or malformed input data, 4 pipeline failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bench import rows_to_csv, run_graph_bench
from .cloud import CloudError, PointCloud, add_gaussian_noise, psnr, quantize_coordinates
from .filtering import FilterConfig, FilterError, denoise
from .graph import GraphError, apply_gaussian_weights, build_slg, compute_sigma_g
from .manifest import RunManifest
from .noise import CHANNEL_NAMES, NoiseEstimationError, estimate_noise
from .ply import PlyError, load_ply, write_ply
from .synth import KINDS, generate_cloud

EXIT_OK = 0
EXIT_INPUT = 3
EXIT_PIPELINE = 4


class InputDataError(Exception):
    """Unreadable or malformed input; maps to exit code 3."""


def _load_cloud(path) -> PointCloud:
    try:
        return load_ply(path)
    except (OSError, PlyError, CloudError) as e:
        raise InputDataError(f"{path}: {e}") from e


def _prepare(pc: PointCloud, bits: int | None) -> PointCloud:
    if bits is not None:
        return quantize_coordinates(pc, bits)
    if not pc.is_quantized:
        raise InputDataError(
            "input has float coordinates; pass --bits to quantize them"
        )
    return pc


def _config_from_args(args) -> FilterConfig:
    return FilterConfig(
        q_max=args.qmax,
        fslr_enabled=not args.no_fslr,
        patch_size=args.patch_size,
        reestimate_interval=args.interval,
    )


def _config_snapshot(args, extra: dict | None = None) -> dict:
    snap = {}
    for key in ("bits", "patch_size", "qmax", "interval", "no_fslr", "sigma",
                "seed", "format", "parallel", "n", "kind", "k", "sizes"):
        if hasattr(args, key):
            snap[key] = getattr(args, key)
    if extra:
        snap.update(extra)
    return snap


def _frame_paths(input_path: Path) -> list[Path]:
    if input_path.is_dir():
        frames = sorted(p for p in input_path.iterdir() if p.suffix.lower() == ".ply")
        if not frames:
            raise InputDataError(f"{input_path}: no .ply files in directory")
        return frames
    if not input_path.exists():
        raise InputDataError(f"{input_path}: no such file")
    return [input_path]


def _ground_truth_for(frame: Path, gt_arg: str | None, sequence: bool) -> Path | None:
    if gt_arg is None:
        return None
    gt = Path(gt_arg)
    if gt.is_dir():
        cand = gt / frame.name
        if not cand.exists():
            raise InputDataError(f"ground truth for {frame.name} not found in {gt}")
        return cand
    if sequence:
        raise InputDataError("--ground-truth must be a directory for sequences")
    return gt


def cmd_denoise(args) -> int:
    in_path = Path(args.input)
    out_path = Path(args.output)
    frames = _frame_paths(in_path)
    sequence = in_path.is_dir()
    if sequence:
        out_path.mkdir(parents=True, exist_ok=True)
    cfg = _config_from_args(args)
    k = cfg.reestimate_interval

    def run_frame(idx: int, frame: Path, cached: tuple[int, float] | None):
        pc = _prepare(_load_cloud(frame), args.bits)
        if cached is None:
            out, report = denoise(pc, cfg)
        else:
            out, report = denoise(pc, cfg, cached_q=cached[0], cached_sigma_est=cached[1])
        dest = out_path / frame.name if sequence else out_path
        write_ply(out, dest, args.format)
        gt = _ground_truth_for(frame, args.ground_truth, sequence)
        if gt is not None:
            report.psnr_db = psnr(_load_cloud(gt), out)
        return dest, report

    reports: list = [None] * len(frames)
    dests: list = [None] * len(frames)
    for group_start in range(0, len(frames), k):
        group = list(enumerate(frames))[group_start:group_start + k]
        idx0, frame0 = group[0]
        dests[idx0], reports[idx0] = run_frame(idx0, frame0, None)
        cached = (reports[idx0].selected_q, reports[idx0].sigma_est)
        rest = group[1:]
        if args.parallel and rest:
            with ThreadPoolExecutor() as pool:
                futures = {i: pool.submit(run_frame, i, fr, cached) for i, fr in rest}
            for i, fut in futures.items():
                dests[i], reports[i] = fut.result()
        else:
            for i, fr in rest:
                dests[i], reports[i] = run_frame(i, fr, cached)

    for frame, report in zip(frames, reports):
        line = (
            f"{frame.name}: q={report.selected_q} sigma_est={report.sigma_est:.3f}"
            f"{' (cached)' if report.cached else ''}"
        )
        if report.psnr_db is not None:
            line += f" psnr_db={report.psnr_db:.3f}"
        print(line)

    manifest = RunManifest(
        command="denoise",
        inputs=[str(f) for f in frames],
        outputs=[str(d) for d in dests],
        config=_config_snapshot(args),
        frames=[
            {"frame": f.name, **r.to_dict()} for f, r in zip(frames, reports)
        ],
    )
    mpath = args.manifest or (
        out_path / "manifest.jsonl" if sequence else f"{out_path}.manifest.jsonl"
    )
    manifest.write(mpath)
    return EXIT_OK


def cmd_add_noise(args) -> int:
    pc = _load_cloud(args.input)
    if args.sigma < 0:
        raise CloudError(f"--sigma must be >= 0, got {args.sigma}")
    noisy = add_gaussian_noise(pc, args.sigma, args.seed)
    write_ply(noisy, args.output, args.format)
    print(f"wrote {args.output} (sigma={args.sigma}, seed={args.seed})")
    manifest = RunManifest(
        command="add-noise",
        inputs=[str(args.input)],
        outputs=[str(args.output)],
        config=_config_snapshot(args),
    )
    manifest.write(f"{args.output}.manifest.jsonl")
    return EXIT_OK


def cmd_estimate_noise(args) -> int:
    pc = _prepare(_load_cloud(args.input), args.bits)
    g = build_slg(pc)
    g = apply_gaussian_weights(g, compute_sigma_g(pc, g))
    est = estimate_noise(pc, g, args.patch_size)
    print(f"points={pc.n_points} eligible_patches={est.eligible_count}")
    for c, name in enumerate(CHANNEL_NAMES):
        print(
            f"channel {name}: sigma={est.per_channel_sigma[c]:.4f} "
            f"m={est.m[c]} tau={est.tau[c]:.6f} fallback={bool(est.fallback[c])}"
        )
        ev = " ".join(f"{v:.6g}" for v in est.eigenvalues[c])
        print(f"  eigenvalues: {ev}")
    print(f"sigma_est={est.sigma_est:.6f}")
    if args.actual_sigma is not None:
        print(f"E_ne={abs(est.sigma_est - args.actual_sigma):.6f}")
    if args.dump_graph:
        Path(args.dump_graph).write_text(g.edge_list_text())
    if args.plot:
        from .plots import plot_eigen_spectrum

        plot_eigen_spectrum(est, args.plot)
    return EXIT_OK


def cmd_psnr(args) -> int:
    ref = _load_cloud(args.reference)
    test = _load_cloud(args.test)
    print(f"psnr_db={psnr(ref, test):.4f}")
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    pc, labels = generate_cloud(args.kind, args.n, args.bits, args.seed)
    write_ply(pc, args.output, args.format)
    outputs = [str(args.output)]
    if labels is not None:
        side = f"{args.output}.labels.txt"
        Path(side).write_text("\n".join(str(int(v)) for v in labels) + "\n")
        outputs.append(side)
    print(f"wrote {args.output} ({pc.n_points} points, kind={args.kind})")
    manifest = RunManifest(
        command="gen-synthetic",
        inputs=[],
        outputs=outputs,
        config=_config_snapshot(args),
    )
    manifest.write(f"{args.output}.manifest.jsonl")
    return EXIT_OK


def cmd_bench_graph(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if not sizes:
        raise InputDataError("--sizes needs at least one point count")
    rows = run_graph_bench(sizes, k=args.k, bits=args.bits, seed=args.seed)
    csv_text = rows_to_csv(rows)
    print(csv_text, end="")
    if args.csv:
        Path(args.csv).write_text(csv_text)
        if not args.no_plot:
            from .plots import plot_bench

            plot_bench(rows, Path(args.csv).with_suffix(".png"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fgbd",
        description="Fast graph-based denoising of point-cloud colors.",
        epilog="exit codes: 0 ok, 2 usage, 3 bad input data, 4 pipeline failure",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_pipeline_flags(p):
        p.add_argument("--bits", type=int, default=None,
                       help="quantize coordinates to this many bits per axis")
        p.add_argument("--patch-size", type=int, default=7,
                       help="patch length D for noise estimation (default 7)")

    p = sub.add_parser("denoise", help="denoise one PLY file or a directory of frames")
    p.add_argument("input", help="PLY file, or directory processed in filename order")
    p.add_argument("output", help="output PLY file, or directory for sequences")
    add_pipeline_flags(p)
    p.add_argument("--qmax", type=int, default=64, help="largest filter iteration count")
    p.add_argument("--interval", type=int, default=10,
                   help="re-estimate noise every K frames (default 10)")
    p.add_argument("--no-fslr", action="store_true",
                   help="disable the limited-region mask during filter selection")
    p.add_argument("--ground-truth", default=None,
                   help="clean PLY file or directory; adds per-frame PSNR to the manifest")
    p.add_argument("--parallel", action="store_true",
                   help="filter reuse-frames of each interval concurrently")
    p.add_argument("--format", choices=["ascii", "binary"], default="binary")
    p.add_argument("--manifest", default=None, help="manifest path override")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("add-noise", help="add clipped Gaussian color noise")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--sigma", type=float, required=True, help="noise standard deviation")
    p.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    p.add_argument("--format", choices=["ascii", "binary"], default="binary")
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("estimate-noise", help="report the estimated noise level")
    p.add_argument("input")
    add_pipeline_flags(p)
    p.add_argument("--actual-sigma", type=float, default=None,
                   help="also print the absolute estimation error")
    p.add_argument("--plot", default=None, help="save an eigenvalue spectrum figure")
    p.add_argument("--dump-graph", default=None,
                   help="write the weighted edge list to this path")
    p.set_defaults(func=cmd_estimate_noise)

    p = sub.add_parser("psnr", help="PSNR between two equally sized clouds")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=cmd_psnr)

    p = sub.add_parser("gen-synthetic", help="write a deterministic synthetic cloud")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("output")
    p.add_argument("--n", type=int, required=True, help="number of points")
    p.add_argument("--bits", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["ascii", "binary"], default="binary")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("bench-graph", help="time scan-line vs brute-force construction")
    p.add_argument("--sizes", required=True, help="comma-separated point counts")
    p.add_argument("--k", type=int, default=6, help="neighbors for the kNN baseline")
    p.add_argument("--bits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None,
                   help="write the table here (a .png figure lands alongside)")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.set_defaults(func=cmd_bench_graph)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputDataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (CloudError, GraphError, NoiseEstimationError, FilterError, PlyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
