"""Command-line interface.

Subcommands: fuse (dual-view stacks to one), simulate (degrade a clean
stack into a synthetic view pair), evaluate (fusion quality CSV), and
transform (decomposition self-check on one slice).

Exit codes: 0 success, 2 usage, 3 I/O, 4 validation, 5 internal.  On
failure a single machine-readable line `sheetfuse: error[<kind>]:
<message>` is printed to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from sheetfuse import __version__, config as config_mod, stack_io
from sheetfuse.fusion import baseline_fuse, fuse_volume
from sheetfuse.geometry import sample_geometry
from sheetfuse.metrics import evaluate_pair
from sheetfuse.nsct import nsct_decompose, nsct_reconstruct
from sheetfuse.nsct.filters import TABLE_VERSION
from sheetfuse.stack_io import StackError, ViewPair, Volume
from sheetfuse.synth import BlurModel, simulate_views

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_INTERNAL = 5


def _fail(kind: str, code: int, err: BaseException) -> int:
    print(f"sheetfuse: error[{kind}]: {err}", file=sys.stderr)
    return code


def _load_oriented(path, cfg: config_mod.RunConfig) -> Volume:
    vol = stack_io.load_stack(path)
    return Volume(data=vol.data, axis=cfg.io_axis, a_side=cfg.io_a_side)


def _write_manifest(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _config_lines(resolved: dict):
    return [f"{key} = {resolved[key]}" for key in sorted(resolved)]


def _build_cfg(args) -> config_mod.RunConfig:
    return config_mod.build_config(
        config_path=getattr(args, "config", None),
        overrides=getattr(args, "set", None) or [])


def cmd_fuse(args) -> int:
    cfg = _build_cfg(args)
    pair = ViewPair(view_a=_load_oriented(args.view_a, cfg),
                    view_b=_load_oriented(args.view_b, cfg))
    result = fuse_volume(pair, cfg)
    stack_io.save_stack(result.fused, args.out, bit_depth=args.bit_depth)
    if args.boundary_out:
        stack_io.write_boundary_csv(args.boundary_out, result.boundaries)

    lines = [f"sheetfuse {__version__} (filter tables v{TABLE_VERSION})",
             "command = fuse",
             f"view_a = {args.view_a}",
             f"view_b = {args.view_b}",
             f"out = {args.out}",
             f"slices = {result.fused.depth}"]
    if result.errors:
        lines += [f"slice_error z={z} = {msg}" for z, msg in result.errors]
    lines += _config_lines(result.config_echo)
    lines += [f"timing.{k} = {v:.6f}" for k, v in sorted(result.timing.items())]
    _write_manifest(str(args.out) + ".manifest.txt", lines)
    for z, msg in result.errors:
        print(f"warning: slice z={z} fell back to average: {msg}", file=sys.stderr)
    return EXIT_OK


def _parse_ghost(text):
    parts = text.split(",")
    if len(parts) != 5:
        raise ValueError(
            f"--ghost expects x,y,w,h,amp (5 comma-separated values), got {text!r}")
    x, y, w, h = (int(p) for p in parts[:4])
    amp = float(parts[4])
    # CLI order is x,y,w,h = col,row,width,height; internal is row-major
    return (y, x, h, w), amp


def cmd_simulate(args) -> int:
    if args.sigma_max < 0:
        raise ValueError("--sigma-max must be >= 0")
    cfg = config_mod.RunConfig()
    gt = stack_io.load_stack(args.ground_truth)
    ghosts = [_parse_ghost(g) for g in (args.ghost or [])]

    out_a = np.empty_like(gt.data)
    out_b = np.empty_like(gt.data)
    for z in range(gt.depth):
        sl = gt.data[z]
        model = BlurModel(
            sigma_max=args.sigma_max,
            noise_sigma=args.noise_sigma,
            seed=args.seed + z,
            ghosts=[(region, amp, args.seed + z + 1000 * (k + 1))
                    for k, (region, amp) in enumerate(ghosts)])
        try:
            _, profile = sample_geometry(
                sl, sl, bins=cfg.seg_bins, alpha=cfg.seg_alpha,
                min_component_px=cfg.seg_min_component_px)
        except ValueError as err:
            if not str(err).startswith(("no foreground separation",
                                        "fewer than 3 foreground pixels")):
                raise
            out_a[z] = sl   # nothing to blur on an empty slice
            out_b[z] = sl
            continue
        va, vb = simulate_views(sl, profile, model)
        out_a[z] = va
        out_b[z] = vb

    stack_io.save_stack(Volume(data=out_a), args.out_a, bit_depth="32f")
    stack_io.save_stack(Volume(data=out_b), args.out_b, bit_depth="32f")
    lines = [f"sheetfuse {__version__} (filter tables v{TABLE_VERSION})",
             "command = simulate",
             f"ground_truth = {args.ground_truth}",
             f"out_a = {args.out_a}",
             f"out_b = {args.out_b}",
             f"sigma_max = {args.sigma_max}",
             f"noise_sigma = {args.noise_sigma}",
             f"seed = {args.seed}",
             "per_slice_seed = seed + z; ghost seeds = seed + z + 1000*(k+1)"]
    lines += [f"ghost = {g}" for g in (args.ghost or [])]
    _write_manifest(str(args.out_a) + ".manifest.txt", lines)
    return EXIT_OK


def _metric_row(report):
    row = {"q_mi": report.q_mi, "q_g": report.q_g, "q_s": report.q_s}
    if report.emse is not None:
        row["emse"] = report.emse
        row["ssim"] = report.ssim
    if report.flags:
        row["flags"] = ";".join(sorted(report.flags))
    return row


def cmd_evaluate(args) -> int:
    cfg = config_mod.RunConfig()
    vol_a = _load_oriented(args.view_a, cfg)
    vol_b = _load_oriented(args.view_b, cfg)
    gt = stack_io.load_stack(args.ground_truth) if args.ground_truth else None
    methods = []
    for path in args.fused:
        vol_f = stack_io.load_stack(path)
        if vol_f.shape != vol_a.shape:
            raise ValueError(
                f"{path}: fused shape {vol_f.shape} != inputs {vol_a.shape}")
        methods.append((Path(path).stem, vol_f))
    if gt is not None and gt.shape != vol_a.shape:
        raise ValueError(f"ground truth shape {gt.shape} != inputs {vol_a.shape}")

    metric_names = ["q_mi", "q_g", "q_s"] + (["emse", "ssim"] if gt is not None else [])
    per_method = {name: [] for name, _ in methods}
    for name, vol_f in methods:
        for z in range(vol_a.depth):
            report = evaluate_pair(vol_a.data[z], vol_b.data[z], vol_f.data[z],
                                   gt=None if gt is None else gt.data[z])
            per_method[name].append(_metric_row(report))

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["z", "metric"] + [name for name, _ in methods])
    for z in range(vol_a.depth):
        for metric in metric_names:
            writer.writerow(
                [z, metric] + [f"{per_method[name][z][metric]:.10g}"
                               for name, _ in methods])
    for metric in metric_names:
        writer.writerow(
            ["mean", metric]
            + [f"{np.mean([r[metric] for r in per_method[name]]):.10g}"
               for name, _ in methods])
    flagged = [(name, z, row["flags"])
               for name, _ in methods
               for z, row in enumerate(per_method[name]) if "flags" in row]
    for name, z, flags in flagged:
        writer.writerow(["flag", flags, name, f"z={z}"])

    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_transform(args) -> int:
    cfg = _build_cfg(args)
    vol = _load_oriented(args.input, cfg)
    sl = stack_io.to_canonical(vol).data[0]
    coeffs = nsct_decompose(sl, cfg.nsct_scales, cfg.nsct_directions)
    recon = nsct_reconstruct(coeffs)
    err = float(np.abs(recon - sl).max())
    print(f"slice shape: {sl.shape[0]}x{sl.shape[1]}"
          + (f" (first of {vol.depth} pages)" if vol.depth > 1 else ""))
    print("band energies (sum of squares):")
    for i, scale in enumerate(coeffs.bands):
        for l, band in enumerate(scale):
            print(f"  scale {i} dir {l:2d}: {float((band ** 2).sum()):.6e}")
    print(f"  lowpass     : {float((coeffs.lowpass ** 2).sum()):.6e}")
    print(f"round-trip max abs error: {err:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sheetfuse",
        description="Dual-view light-sheet stack fusion along a per-column "
                    "focus changeover boundary.",
        epilog="exit codes: 0 success, 2 usage, 3 I/O, 4 validation, 5 internal")
    parser.add_argument("--version", action="version",
                        version=f"sheetfuse {__version__} "
                                f"(filter tables v{TABLE_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fuse = sub.add_parser(
        "fuse", help="fuse two registered opposing-illumination stacks",
        epilog="also writes <out>.manifest.txt with the resolved configuration")
    p_fuse.add_argument("--view-a", required=True, help="TIFF stack, view a")
    p_fuse.add_argument("--view-b", required=True, help="TIFF stack, view b")
    p_fuse.add_argument("--out", required=True, help="fused TIFF output")
    p_fuse.add_argument("--boundary-out", help="per-column boundary CSV "
                        "(rows in the oriented frame: illumination along rows, "
                        "view a from row 0)")
    p_fuse.add_argument("--bit-depth", default="32f", choices=["8", "16", "32f"],
                        help="output bit depth (default 32f)")
    p_fuse.add_argument("--config", help="flat key = value config file")
    p_fuse.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    p_fuse.set_defaults(func=cmd_fuse)

    p_sim = sub.add_parser(
        "simulate", help="degrade a clean stack into a synthetic view pair")
    p_sim.add_argument("--ground-truth", required=True, help="clean TIFF stack")
    p_sim.add_argument("--out-a", required=True, help="output TIFF, view a")
    p_sim.add_argument("--out-b", required=True, help="output TIFF, view b")
    p_sim.add_argument("--sigma-max", type=float, required=True,
                       help="blur sigma at full sample depth (pixels)")
    p_sim.add_argument("--seed", type=int, default=0,
                       help="base RNG seed (slice z uses seed + z)")
    p_sim.add_argument("--noise-sigma", type=float, default=0.0,
                       help="additive Gaussian noise level inside the sample")
    p_sim.add_argument("--ghost", action="append", metavar="X,Y,W,H,AMP",
                       help="add a glow to view a: column, row, width, height, "
                            "peak amplitude (repeatable)")
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser(
        "evaluate", help="score fused stacks against their input views")
    p_eval.add_argument("--view-a", required=True)
    p_eval.add_argument("--view-b", required=True)
    p_eval.add_argument("--fused", required=True, action="append",
                        help="fused TIFF stack; repeat to compare methods")
    p_eval.add_argument("--ground-truth", help="clean reference stack "
                        "(adds emse and ssim columns)")
    p_eval.add_argument("--out", help="CSV output path (default stdout)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_tr = sub.add_parser(
        "transform", help="decompose one slice and print band energies "
                          "and round-trip error")
    p_tr.add_argument("--input", required=True, help="TIFF slice "
                      "(first page of a stack)")
    p_tr.add_argument("--config", help="flat key = value config file")
    p_tr.add_argument("--set", action="append", metavar="KEY=VALUE",
                      help="override one config key (repeatable)")
    p_tr.set_defaults(func=cmd_transform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        return _fail("io", EXIT_IO, err)
    except StackError as err:
        return _fail("validation", EXIT_VALIDATION, err)
    except OSError as err:
        return _fail("io", EXIT_IO, err)
    except ValueError as err:
        return _fail("validation", EXIT_VALIDATION, err)
    except Exception as err:   # noqa: BLE001 - last-resort CLI guard
        return _fail("internal", EXIT_INTERNAL, err)


if __name__ == "__main__":
    sys.exit(main())
