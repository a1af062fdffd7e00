"""Per-slice fusion pipeline and volume-level batch execution.

A slice is fused by scoring per-pixel clarity in both views, locating
the per-column changeover row where the better view switches, and
splicing the views at that row with an optional feathered seam.  Volume
runs fan slices out to a thread pool; slices are independent, so the
worker count never changes the output.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from sheetfuse import stack_io
from sheetfuse.boundary import (BoundaryCurve, em_estimate, normalize_focus_pair)
from sheetfuse.config import RunConfig
from sheetfuse.geometry import sample_geometry
from sheetfuse.nsct import focus_measure, nsct_decompose
from sheetfuse.stack_io import ViewPair, Volume

# failures that mean "nothing to segment", not "broken input"
_NO_SAMPLE_PREFIXES = (
    "no foreground separation",
    "fewer than 3 foreground pixels",
    "no sample found",
)


@dataclass
class FusionResult:
    """Fused volume with per-slice boundaries and run bookkeeping."""

    fused: Volume
    boundaries: list
    timing: dict
    config_echo: dict
    errors: list = field(default_factory=list)


def _is_no_sample(err: ValueError) -> bool:
    msg = str(err)
    return any(msg.startswith(p) for p in _NO_SAMPLE_PREFIXES)


def compose(slice_a, slice_b, omega, feather_w: int = 0) -> np.ndarray:
    """Splice two views at per-column changeover rows.

    feather_w = 0 is a hard cut: rows up to and including omega_i come
    from slice_a, the rest from slice_b.  feather_w > 0 cross-fades
    linearly over the 2*feather_w + 1 rows centered on omega_i and is
    identical to the hard cut outside that band.  Every output pixel
    stays within [min(a, b), max(a, b)] at that pixel.
    """
    a = np.asarray(slice_a, dtype=np.float64)
    b = np.asarray(slice_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"slice shapes differ: {a.shape} vs {b.shape}")
    if feather_w < 0:
        raise ValueError("feather_w must be >= 0")
    om = omega.omega if isinstance(omega, BoundaryCurve) else np.asarray(omega)
    if om.shape[0] != a.shape[1]:
        raise ValueError(f"boundary has {om.shape[0]} columns, image has {a.shape[1]}")

    j = np.arange(a.shape[0])[:, None]
    if feather_w == 0:
        return np.where(j <= om[None, :], a, b)
    w = np.clip(0.5 - (j - om[None, :]) / (2.0 * feather_w), 0.0, 1.0)
    out = np.where(w >= 1.0, a, np.where(w <= 0.0, b, b + w * (a - b)))
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def baseline_fuse(slice_a, slice_b, mode: str = "average") -> np.ndarray:
    """Reference fusers: pixel mean, or per-pixel pick of the view with
    the larger clarity score (ties go to view a)."""
    a = np.asarray(slice_a, dtype=np.float64)
    b = np.asarray(slice_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"slice shapes differ: {a.shape} vs {b.shape}")
    if mode == "average":
        return 0.5 * (a + b)
    if mode == "max_focus":
        cfg = RunConfig()
        fa = focus_measure(nsct_decompose(a, cfg.nsct_scales, cfg.nsct_directions),
                           cfg.nsct_epsilon)
        fb = focus_measure(nsct_decompose(b, cfg.nsct_scales, cfg.nsct_directions),
                           cfg.nsct_epsilon)
        return np.where(fa >= fb, a, b)
    raise ValueError(f"unknown baseline mode: {mode}")


def _no_sample_curve(cols: int, reason: str) -> BoundaryCurve:
    return BoundaryCurve(
        omega=np.zeros(cols, dtype=np.int64),
        valid=np.zeros(cols, dtype=bool),
        diagnostics={"warning": reason, "fallback": "average"})


def fuse_slice(slice_a, slice_b, cfg: RunConfig | None = None):
    """Full pipeline for one registered slice pair; returns the fused
    slice and its boundary curve (stage timings in the diagnostics).

    Slices with no detectable sample fall back to the pixel average,
    flagged in the curve's diagnostics rather than raising.
    """
    if cfg is None:
        cfg = RunConfig()
    a = np.asarray(slice_a, dtype=np.float64)
    b = np.asarray(slice_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"slice shapes differ: {a.shape} vs {b.shape}")
    timings = {}

    t0 = time.perf_counter()
    fa = focus_measure(nsct_decompose(a, cfg.nsct_scales, cfg.nsct_directions),
                       cfg.nsct_epsilon)
    fb = focus_measure(nsct_decompose(b, cfg.nsct_scales, cfg.nsct_directions),
                       cfg.nsct_epsilon)
    timings["focus"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        _, profile = sample_geometry(
            a, b, bins=cfg.seg_bins, alpha=cfg.seg_alpha,
            min_component_px=cfg.seg_min_component_px)
        timings["geometry"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        na, nb = normalize_focus_pair(fa, fb)
        curve = em_estimate(na, nb, profile, cfg.em_config())
        timings["boundary"] = time.perf_counter() - t0
    except ValueError as err:
        if not _is_no_sample(err):
            raise
        timings.setdefault("geometry", time.perf_counter() - t0)
        curve = _no_sample_curve(a.shape[1], str(err))
        fused = baseline_fuse(a, b, "average")
        curve.diagnostics["timings"] = timings
        return fused, curve

    t0 = time.perf_counter()
    fused = compose(a, b, curve, cfg.fuse_feather)
    timings["compose"] = time.perf_counter() - t0
    curve.diagnostics["timings"] = timings
    return fused, curve


def fuse_volume(pair: ViewPair, cfg: RunConfig | None = None) -> FusionResult:
    """Fuse every z-slice of a registered pair, in parallel.

    Work runs in the caller's orientation-normalized frame (illumination
    along rows, view a from the top) and is restored to the input frame
    on output; boundary rows are reported in the normalized frame.
    Per-slice failures are recorded with their z index and fall back to
    the pixel average; the call fails only if every slice fails.
    """
    if cfg is None:
        cfg = RunConfig()
    if (pair.view_a.axis != pair.view_b.axis
            or pair.view_a.a_side != pair.view_b.a_side):
        raise ValueError("views disagree on axis or a_side")
    t_start = time.perf_counter()
    vol_a = stack_io.to_canonical(pair.view_a)
    vol_b = stack_io.to_canonical(pair.view_b)
    depth = vol_a.depth

    def run_one(z):
        try:
            return fuse_slice(vol_a.data[z], vol_b.data[z], cfg), None
        except Exception as err:   # noqa: BLE001 - collected per slice
            fallback = baseline_fuse(vol_a.data[z], vol_b.data[z], "average")
            curve = _no_sample_curve(vol_a.data.shape[2], f"failed: {err}")
            return (fallback, curve), str(err)

    workers = cfg.resolved_workers()
    if workers == 1 or depth == 1:
        outcomes = [run_one(z) for z in range(depth)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, range(depth)))

    errors = [(z, err) for z, (_, err) in enumerate(outcomes) if err is not None]
    if len(errors) == depth:
        raise RuntimeError(
            f"all {depth} slices failed; first error at z={errors[0][0]}: {errors[0][1]}")

    fused = np.stack([out[0][0] for out in outcomes])
    boundaries = [out[0][1] for out in outcomes]
    fused = np.clip(fused, 0.0, 1.0)
    restored = stack_io.from_canonical(fused, pair.view_a.axis, pair.view_a.a_side)

    timing = {"total": time.perf_counter() - t_start}
    for stage in ("focus", "geometry", "boundary", "compose"):
        vals = [c.diagnostics.get("timings", {}).get(stage) for c in boundaries]
        vals = [v for v in vals if v is not None]
        if vals:
            timing[stage] = float(sum(vals))
    return FusionResult(
        fused=Volume(data=restored, axis=pair.view_a.axis, a_side=pair.view_a.a_side),
        boundaries=boundaries,
        timing=timing,
        config_echo=cfg.resolved(vol_a.data.shape[1], vol_a.data.shape[2]),
        errors=errors)
