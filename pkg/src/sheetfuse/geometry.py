"""Foreground segmentation and per-column light-sheet incident points.

The sample silhouette is segmented from a reference slice (pixel-wise
maximum of the two views), despeckled, wrapped in a concave bounding
polygon, and reduced per column to the first/last sample rows: the rows
where each view's light sheet enters the tissue.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay, QhullError


@dataclass(frozen=True)
class IncidentProfile:
    """Per-column sample entry/exit rows.

    p_u[i] / p_l[i]: first / last foreground row of column i (the entry
    rows for the top-side and bottom-side light source); meaningful only
    where valid[i] is True.
    """

    p_u: np.ndarray
    p_l: np.ndarray
    valid: np.ndarray


def otsu_threshold(img, bins: int = 256) -> float:
    """Histogram threshold maximizing inter-class variance.

    The histogram uses equal-width bins on [0, 1]; the returned value is
    the bin edge with maximal between-class variance, ties broken toward
    the lowest edge.  Raises ValueError("no foreground separation") when
    every candidate split leaves one class empty (constant image).
    """
    img = np.asarray(img)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    counts, edges = np.histogram(img, bins=bins, range=(0.0, 1.0))
    return otsu_from_histogram(counts, edges)


def otsu_from_histogram(counts, edges) -> float:
    """Otsu split of a precomputed histogram (counts per bin, bin edges)."""
    counts = np.asarray(counts, dtype=np.float64)
    centers = (np.asarray(edges)[:-1] + np.asarray(edges)[1:]) / 2.0
    total = counts.sum()
    w0 = np.cumsum(counts)[:-1]            # mass below edge k+1
    w1 = total - w0
    m0 = np.cumsum(counts * centers)[:-1]
    m1 = m0[-1] + counts[-1] * centers[-1] - m0
    ok = (w0 > 0) & (w1 > 0)
    if not ok.any():
        raise ValueError("no foreground separation")
    with np.errstate(invalid="ignore", divide="ignore"):
        var_b = np.where(ok, w0 * w1 * (m0 / w0 - m1 / w1) ** 2, -np.inf)
    k = int(np.argmax(var_b))              # first max = lowest edge on ties
    return float(edges[k + 1])


def foreground_mask(img, threshold: float, min_component_px: int = 64) -> np.ndarray:
    """Binarize at threshold and drop small 4-connected components."""
    mask = np.asarray(img) >= threshold
    if min_component_px > 1 and mask.any():
        labels, n = ndimage.label(mask)    # default structure = 4-connectivity
        sizes = np.bincount(labels.ravel())
        keep = sizes >= min_component_px
        keep[0] = False
        mask = keep[labels]
    return mask


def bounding_polygon(mask, alpha: float) -> np.ndarray:
    """Filled concave hull of the foreground at shape parameter alpha.

    Delaunay-triangulates the foreground boundary pixels, keeps the
    triangles whose circumradius is at most alpha (in pixels), and
    rasterizes the kept triangles.  Larger alpha closes larger
    concavities; alpha beyond the blob diameter degenerates to the
    filled convex hull.  The result always contains the input mask.
    """
    mask = np.asarray(mask, dtype=bool)
    npix = int(mask.sum())
    if npix < 3:
        raise ValueError("fewer than 3 foreground pixels")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    # boundary pixels: foreground with a 4-neighbor outside the mask
    interior = ndimage.binary_erosion(
        mask, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool),
        border_value=0)
    pts = np.argwhere(mask & ~interior)
    if pts.shape[0] < 3:
        return mask.copy()
    try:
        tri = Delaunay(pts.astype(np.float64))
    except QhullError:
        return mask.copy()                 # collinear foreground

    simplices = tri.simplices
    pa = pts[simplices[:, 0]].astype(np.float64)
    pb = pts[simplices[:, 1]].astype(np.float64)
    pc = pts[simplices[:, 2]].astype(np.float64)
    la = np.linalg.norm(pb - pc, axis=1)
    lb = np.linalg.norm(pa - pc, axis=1)
    lc = np.linalg.norm(pa - pb, axis=1)
    area2 = np.abs((pb[:, 0] - pa[:, 0]) * (pc[:, 1] - pa[:, 1])
                   - (pc[:, 0] - pa[:, 0]) * (pb[:, 1] - pa[:, 1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        circumradius = np.where(area2 > 0, la * lb * lc / (2.0 * area2), np.inf)
    kept = circumradius <= alpha

    rows, cols = mask.shape
    grid = np.stack(np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij"),
                    axis=-1).reshape(-1, 2).astype(np.float64)
    simplex_of = tri.find_simplex(grid)
    inside = (simplex_of >= 0) & kept[np.clip(simplex_of, 0, None)]
    return (inside.reshape(rows, cols)) | mask


def incident_profile(polygon_mask) -> IncidentProfile:
    """First/last foreground row per column of a filled silhouette mask."""
    mask = np.asarray(polygon_mask, dtype=bool)
    rows = mask.shape[0]
    valid = mask.any(axis=0)
    p_u = np.where(valid, mask.argmax(axis=0), 0).astype(np.int64)
    p_l = np.where(valid, rows - 1 - mask[::-1, :].argmax(axis=0), 0).astype(np.int64)
    return IncidentProfile(p_u=p_u, p_l=p_l, valid=valid)


def sample_geometry(slice_a, slice_b, bins: int = 256, alpha: float | None = None,
                    min_component_px: int = 64):
    """Full geometry pipeline on the shared silhouette of a view pair.

    Segments the pixel-wise maximum of the two views (the silhouette is
    shared between views; one-sided artifacts are handled downstream by
    the attenuation weighting, not here).  Returns (polygon_mask,
    IncidentProfile).  Raises ValueError("no foreground separation") or
    ValueError("fewer than 3 foreground pixels") when there is no
    usable sample.
    """
    ref = np.maximum(np.asarray(slice_a), np.asarray(slice_b))
    if alpha is None:
        alpha = 0.05 * max(ref.shape)
    threshold = otsu_threshold(ref, bins=bins)
    mask = foreground_mask(ref, threshold, min_component_px)
    poly = bounding_polygon(mask, alpha)
    return poly, incident_profile(poly)
