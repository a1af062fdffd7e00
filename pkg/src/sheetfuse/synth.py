"""Synthetic dual-view degradation of a clean slice.

Models each illumination side as a depth-dependent Gaussian blur: rows
near the light's entry side stay sharp, rows deep inside the sample get
progressively blurrier.  Two opposing views of the same clean slice
give a controlled test bed with a known best changeover row.  Ghost
injection adds the smooth out-of-sample glow one view can exhibit where
the other sees clean background.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from sheetfuse.geometry import IncidentProfile

BANK_STEP = 0.25


@dataclass
class BlurModel:
    """Depth-to-blur schedule shared by both simulated views.

    profile maps (depth_rows, column_thickness) to a blur sigma and must
    be 0 at depth 0, nondecreasing, and sigma_max at full thickness; the
    default (None) is linear, sigma_max * depth / thickness.  ghosts is
    a list of (region, amplitude, seed) applied to view a after blur,
    region being (row0, col0, height, width).
    """

    sigma_max: float
    profile: object = None
    ghosts: list = field(default_factory=list)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_max < 0:
            raise ValueError("sigma_max must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def sigma_at(self, depth, thickness):
        """Blur sigma for pixels depth rows past the entry side of a
        column spanning thickness rows."""
        depth = np.asarray(depth, dtype=np.float64)
        thickness = np.asarray(thickness, dtype=np.float64)
        if self.profile is not None:
            return np.asarray(self.profile(depth, thickness), dtype=np.float64)
        safe = np.where(thickness > 0, thickness, 1.0)
        return self.sigma_max * np.where(thickness > 0, depth / safe, 0.0)


def _quantized_blur(gt: np.ndarray, sigma: np.ndarray, inside: np.ndarray) -> np.ndarray:
    """Apply per-pixel Gaussian blur with sigma rounded to BANK_STEP.

    Whole-image blurs are computed once per distinct quantized level and
    sampled pointwise, so runtime scales with the number of levels, not
    pixels; pixels outside the sample keep their original values.
    """
    idx = np.zeros(gt.shape, dtype=np.int64)
    idx[inside] = np.rint(sigma[inside] / BANK_STEP).astype(np.int64)
    out = gt.copy()
    for level in np.unique(idx[inside]):
        if level == 0:
            continue
        blurred = ndimage.gaussian_filter(gt, sigma=level * BANK_STEP)
        pick = inside & (idx == level)
        out[pick] = blurred[pick]
    return out


def simulate_views(gt: np.ndarray, profile: IncidentProfile, model: BlurModel):
    """Degrade a clean slice into an opposing-illumination pair.

    View a is blurred by depth measured from the upper entry rows p_u,
    view b by depth from the lower entry rows p_l.  Pixels outside the
    sample (and all invalid columns) are untouched.  Optional Gaussian
    noise is then added inside the sample only (view a drawn first),
    ghosts are applied to view a, and both views are clipped to [0, 1].
    Deterministic for a fixed model seed.
    """
    gt = np.asarray(gt, dtype=np.float64)
    rows, cols = gt.shape
    if profile.p_u.shape[0] != cols:
        raise ValueError(f"profile has {profile.p_u.shape[0]} columns, image has {cols}")

    j = np.arange(rows)[:, None]
    p_u = profile.p_u[None, :]
    p_l = profile.p_l[None, :]
    inside = (j >= p_u) & (j <= p_l) & profile.valid[None, :]
    thickness = (p_l - p_u).astype(np.float64)

    depth_a = (j - p_u).astype(np.float64)
    depth_b = (p_l - j).astype(np.float64)
    sig_a = model.sigma_at(depth_a, np.broadcast_to(thickness, gt.shape))
    sig_b = model.sigma_at(depth_b, np.broadcast_to(thickness, gt.shape))

    view_a = _quantized_blur(gt, sig_a, inside)
    view_b = _quantized_blur(gt, sig_b, inside)

    if model.noise_sigma > 0:
        rng = np.random.default_rng(model.seed)
        noise_a = rng.normal(0.0, model.noise_sigma, gt.shape)
        noise_b = rng.normal(0.0, model.noise_sigma, gt.shape)
        view_a[inside] += noise_a[inside]
        view_b[inside] += noise_b[inside]

    for region, amplitude, ghost_seed in model.ghosts:
        view_a = inject_ghost(view_a, region, amplitude, ghost_seed)

    return np.clip(view_a, 0.0, 1.0), np.clip(view_b, 0.0, 1.0)


def inject_ghost(view: np.ndarray, region, amplitude: float, seed: int) -> np.ndarray:
    """Add a smooth seeded glow of the given peak amplitude to a
    rectangle (row0, col0, height, width); output clipped to [0, 1]."""
    view = np.asarray(view, dtype=np.float64)
    row0, col0, height, width = (int(v) for v in region)
    if height <= 0 or width <= 0:
        raise ValueError("ghost region must have positive size")
    if row0 < 0 or col0 < 0 or row0 + height > view.shape[0] \
            or col0 + width > view.shape[1]:
        raise ValueError(f"ghost region {region} outside image {view.shape}")
    if amplitude == 0:
        return view.copy()

    rng = np.random.default_rng(seed)
    field_ = rng.random((height, width))
    field_ = ndimage.gaussian_filter(field_, sigma=max(1.0, min(height, width) / 6.0))
    field_ -= field_.min()
    # cosine taper so the glow fades smoothly to zero at the region edge
    wy = np.sin(np.pi * (np.arange(height) + 0.5) / height)[:, None]
    wx = np.sin(np.pi * (np.arange(width) + 0.5) / width)[None, :]
    field_ *= wy * wx
    peak = field_.max()
    if peak > 0:
        field_ *= amplitude / peak
    out = view.copy()
    out[row0:row0 + height, col0:col0 + width] += field_
    return np.clip(out, 0.0, 1.0)


def textured_phantom(shape=(256, 256), seed: int = 0, band=None,
                     background: float = 0.02, lo: float = 0.25, hi: float = 0.9):
    """Procedural clean slice: a textured horizontal band over a dark
    background, with a few brighter blobs for larger-scale structure.

    band is (first_row, last_row) inclusive; default covers the middle
    70% of rows.  Texture is seeded smoothed noise rescaled to [lo, hi].
    """
    rows, cols = shape
    if band is None:
        margin = int(round(0.15 * rows))
        band = (margin, rows - margin - 1)
    r0, r1 = band
    if not 0 <= r0 <= r1 < rows:
        raise ValueError(f"band {band} outside {rows} rows")

    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.random(shape), sigma=1.2)
    span = noise.max() - noise.min()
    if span > 0:
        noise = (noise - noise.min()) / span
    img = np.full(shape, background)
    img[r0:r1 + 1] = lo + (hi - lo) * noise[r0:r1 + 1]

    # a few seeded blobs give the band structure at a coarser scale
    yy, xx = np.mgrid[:rows, :cols]
    for _ in range(6):
        cy = rng.integers(r0, r1 + 1)
        cx = rng.integers(0, cols)
        rad = int(rng.integers(max(3, rows // 32), max(4, rows // 10)))
        gain = float(rng.uniform(0.6, 1.0))
        blob = (yy - cy) ** 2 + (xx - cx) ** 2 <= rad ** 2
        blob[:r0] = False
        blob[r1 + 1:] = False
        img[blob] = np.clip(lo + (hi - lo) * gain * noise[blob] + 0.05, lo, hi)
    return np.clip(img, 0.0, 1.0)
