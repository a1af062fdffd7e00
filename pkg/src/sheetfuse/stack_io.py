"""Image containers and multi-page TIFF stack I/O.

All pixel data is float64 in [0, 1] internally.  Integer TIFF input is
scaled by its type maximum (255 or 65535) so paired views share one
intensity scale; float input is kept as-is when already in [0, 1] and
min-max normalized per volume otherwise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import tifffile


class StackError(ValueError):
    """Malformed stack input: wrong color mode, mismatched pages, bad layout."""


def _check_pixels(data):
    if not np.isfinite(data).all():
        raise StackError("pixel data contains non-finite values")
    if data.min() < 0.0 or data.max() > 1.0:
        raise StackError("pixel data outside [0, 1]; normalize before constructing")


@dataclass(frozen=True)
class Volume:
    """A z-ordered stack of same-sized slices plus illumination metadata.

    data is (Z, M, N) float64 in [0, 1].  axis names the illumination
    axis inside each slice ("rows" or "cols"); a_side is the side that
    view a's light enters from ("top" = the index-0 side of that axis,
    view b implicitly enters from the opposite side).
    """

    data: np.ndarray
    axis: str = "rows"
    a_side: str = "top"

    def __post_init__(self):
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3:
            raise StackError("volume data must be a 3-D (Z, M, N) array")
        if d.shape[0] < 1:
            raise StackError("volume must contain at least one slice")
        if d.shape[1] < 4 or d.shape[2] < 4:
            raise StackError(
                f"slices must be at least 4x4, got {d.shape[1]}x{d.shape[2]}")
        if self.axis not in ("rows", "cols"):
            raise StackError(f"illumination axis must be 'rows' or 'cols', got {self.axis!r}")
        if self.a_side not in ("top", "bottom"):
            raise StackError(f"a_side must be 'top' or 'bottom', got {self.a_side!r}")
        _check_pixels(d)

    @property
    def depth(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class ViewPair:
    """Two registered opposing-illumination volumes of the same sample."""

    view_a: Volume
    view_b: Volume
    registration_assumed: bool = True

    def __post_init__(self):
        if self.view_a.shape != self.view_b.shape:
            raise StackError(
                f"view dimensions differ: {self.view_a.shape} vs {self.view_b.shape}")
        if not self.registration_assumed:
            raise StackError("views must be pre-registered (registration_assumed)")


def load_stack(path, bit_depth_hint=None) -> Volume:
    """Read a single- or multi-page grayscale TIFF as a normalized Volume.

    Parameters
    ----------
    path : str or Path
        Single- or multi-page grayscale TIFF, 8/16-bit unsigned or 32-bit
        float.  Page order becomes z-order.
    bit_depth_hint : int, optional
        Effective bit depth of integer data when it differs from the
        container (e.g. 12-bit counts stored as uint16).  Integer pixels
        are divided by 2**hint - 1 instead of the container maximum.

    Returns
    -------
    Volume
        Intensities in [0, 1]: integer input divided by the type maximum.
        Float input already inside [0, 1] is kept bit-exact; otherwise it
        is min-max normalized over the whole volume (constant volumes map
        to all zeros).
    """
    try:
        with tifffile.TiffFile(path) as tif:
            pages = tif.pages
            arrs = []
            shape0 = None
            for idx, page in enumerate(pages):
                if page.photometric in (tifffile.PHOTOMETRIC.RGB,
                                        tifffile.PHOTOMETRIC.PALETTE):
                    raise StackError(f"page {idx}: RGB or palette TIFF not supported")
                if page.samplesperpixel != 1:
                    raise StackError(
                        f"page {idx}: {page.samplesperpixel} samples per pixel, expected 1")
                arr = page.asarray()
                if arr.ndim != 2:
                    raise StackError(f"page {idx}: not a 2-D grayscale page, shape {arr.shape}")
                if shape0 is None:
                    shape0 = arr.shape
                elif arr.shape != shape0:
                    raise StackError(
                        f"page {idx}: dimensions {arr.shape} differ from page 0 {shape0}")
                arrs.append(arr)
    except tifffile.TiffFileError as exc:
        raise OSError(f"unreadable TIFF {path}: {exc}") from exc
    if not arrs:
        raise StackError(f"{path}: TIFF contains no pages")
    stack = np.stack(arrs)

    if np.issubdtype(stack.dtype, np.unsignedinteger):
        bits = int(bit_depth_hint) if bit_depth_hint else stack.dtype.itemsize * 8
        if not 2 <= bits <= 32:
            raise StackError(f"bit depth hint {bits} out of range")
        data = stack.astype(np.float64) / float(2 ** bits - 1)
        np.clip(data, 0.0, 1.0, out=data)
    elif np.issubdtype(stack.dtype, np.floating):
        data = stack.astype(np.float64)
        if not np.isfinite(data).all():
            raise StackError(f"{path}: float TIFF contains non-finite values")
        lo, hi = float(data.min()), float(data.max())
        if 0.0 <= lo and hi <= 1.0:
            pass   # already normalized; keep values bit-exact
        elif hi > lo:
            data = (data - lo) / (hi - lo)
            np.clip(data, 0.0, 1.0, out=data)
        else:
            data = np.zeros_like(data)
    else:
        raise StackError(f"{path}: unsupported TIFF dtype {stack.dtype}")
    return Volume(data=data)


def save_stack(volume: Volume, path, bit_depth="32f"):
    """Write a Volume as a multi-page TIFF at the requested bit depth.

    bit_depth 8 or 16 quantizes with round-half-away-from-zero; "32f"
    stores float32 losslessly for [0, 1] data at that precision.
    """
    data = volume.data
    key = str(bit_depth).lower()
    if key == "8":
        # data >= 0, so +0.5/floor rounds half away from zero
        out = np.floor(data * 255.0 + 0.5).astype(np.uint8)
    elif key == "16":
        out = np.floor(data * 65535.0 + 0.5).astype(np.uint16)
    elif key in ("32f", "f32", "float32"):
        out = data.astype(np.float32)
    else:
        raise ValueError(f"invalid bit depth {bit_depth!r}: use 8, 16, or 32f")
    tifffile.imwrite(path, out, photometric="minisblack")


def to_canonical(volume: Volume) -> Volume:
    """Reorient a volume to the processing frame: illumination along rows,
    view a entering from the top (row 0) side."""
    data = volume.data
    if volume.axis == "cols":
        data = np.swapaxes(data, 1, 2)
    if volume.a_side == "bottom":
        data = data[:, ::-1, :]
    return Volume(data=np.ascontiguousarray(data), axis="rows", a_side="top")


def from_canonical(data: np.ndarray, axis: str, a_side: str) -> np.ndarray:
    """Undo to_canonical on a (Z, M, N) array, returning the caller's frame."""
    if a_side == "bottom":
        data = data[:, ::-1, :]
    if axis == "cols":
        data = np.swapaxes(data, 1, 2)
    return np.ascontiguousarray(data)


def write_boundary_csv(path, curves):
    """Export per-slice boundary curves as CSV rows `z,col,omega_row,valid`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "col", "omega_row", "valid"])
        for z, curve in enumerate(curves):
            omega = np.asarray(curve.omega)
            valid = np.asarray(curve.valid)
            for col in range(omega.shape[0]):
                writer.writerow([z, col, int(omega[col]), int(bool(valid[col]))])
