"""Filter tables and small-filter algebra for the directional transform.

A filter is a dense 2-D float array paired with the (row, col) grid
position of its center tap.  The two base coefficient tables ship as
plain-text data files; every other filter in the bank (fan, quincunx,
parallelogram, a-trous upsamplings) is derived from them here by tap
modulation and integer linear maps of tap offsets.
"""
from __future__ import annotations

import io
from importlib import resources

import numpy as np

TABLE_VERSION = 1

_table_cache = {}


def load_table(name: str) -> np.ndarray:
    """Load a bundled coefficient table (plain text, np.loadtxt layout)."""
    if name not in _table_cache:
        text = resources.files("sheetfuse.nsct").joinpath("data").joinpath(name).read_text()
        arr = np.loadtxt(io.StringIO(text), dtype=np.float64)
        arr.setflags(write=False)
        _table_cache[name] = arr
    return _table_cache[name]


def pyramid_lowpass():
    """5x5 separable B3-spline lowpass; center (2, 2); taps sum to 1."""
    return load_table("pyramid_lowpass.txt")


def diamond_prototype():
    """7x7 diamond halfband lowpass; center (3, 3); taps sum to 1."""
    return load_table("fan_diamond.txt")


def modulate(filt: np.ndarray, axis: int) -> np.ndarray:
    """Multiply taps by (-1)**offset along one axis, offsets centered."""
    n = filt.shape[axis]
    sign = (-1.0) ** (np.arange(n) - n // 2)
    if axis == 0:
        return filt * sign[:, None]
    return filt * sign[None, :]


def map_taps(filt: np.ndarray, center, mat):
    """Relocate each tap from offset n to offset mat @ n.

    mat is a 2x2 integer matrix (shears and a-trous/parallelogram
    upsamplings).  Returns (array, center) with the center tap kept at
    offset zero, so complementarity of (f, delta - f) pairs survives any
    such map.
    """
    mat = np.asarray(mat, dtype=np.int64)
    rr, cc = np.nonzero(np.ones_like(filt, dtype=bool))
    offs = np.stack([rr - center[0], cc - center[1]])
    new = mat @ offs
    rmin, cmin = int(new[0].min()), int(new[1].min())
    out = np.zeros((int(new[0].max()) - rmin + 1, int(new[1].max()) - cmin + 1))
    out[new[0] - rmin, new[1] - cmin] += filt[rr, cc]
    return out, (-rmin, -cmin)


def atrous(filt: np.ndarray, center, step: int):
    """Insert step-1 zeros between taps along both axes."""
    return map_taps(filt, center, [[step, 0], [0, step]])


def fan_filter():
    """Fan-shaped lowpass: column-modulated diamond prototype."""
    d0 = diamond_prototype()
    return modulate(d0, 1), (3, 3)


def parallelogram_filters():
    """The four sheared fan variants used from direction level 3 on.

    Each is a (filter, center) pair; index k serves the k-th parent
    pairing of the classic iterated filter-bank ladder.
    """
    d0 = diamond_prototype()
    c = (3, 3)
    shears = (
        [[1, -1], [0, 1]],
        [[1, 1], [0, 1]],
        [[1, 0], [-1, 1]],
        [[1, 0], [1, 1]],
    )
    bases = (
        modulate(d0, 0),
        modulate(d0, 1),
        modulate(d0, 0).T,
        modulate(d0, 1).T,
    )
    return [map_taps(b, c, s) for b, s in zip(bases, shears)]


# Quincunx upsampling matrix for direction level 2: offset (r, c) maps to
# (r + c, c - r), rotating the fan passband by 45 degrees.
QUINCUNX = ((1, 1), (-1, 1))


def ladder_matrix(level: int, k: int, nparents: int):
    """Upsampling matrix for parent k (0-based) at direction level >= 3.

    First-half parents shear on rows, second-half on columns; the shear
    offset walks across parents two at a time so sibling wedges tile the
    frequency plane.
    """
    half = nparents // 2
    p = 2 ** (level - 3)
    if k < half:
        slk = 2 * (k // 2) - p + 1
        return 2 * np.array([[p, 0], [0, 1]]) @ np.array([[1, 0], [slk, 1]])
    slk = 2 * ((k - half) // 2) - p + 1
    return 2 * np.array([[1, 0], [0, p]]) @ np.array([[1, slk], [0, 1]])


def ladder_filter_index(level: int, k: int, nparents: int) -> int:
    """Which parallelogram filter parent k uses at direction level >= 3."""
    if k < nparents // 2:
        return k % 2
    return k % 2 + 2


def transfer(filt: np.ndarray, center, shape) -> np.ndarray:
    """Real DFT transfer function of a filter under periodic embedding.

    Every filter in this bank is centrally symmetric (the base tables
    are, and modulation/integer maps preserve it), so the rfft2 of the
    zero-phase embedding is real; the imaginary roundoff is dropped.
    """
    rows, cols = shape
    pad = np.zeros(shape)
    rr, cc = np.nonzero(np.ones_like(filt, dtype=bool))
    pad[(rr - center[0]) % rows, (cc - center[1]) % cols] += filt[rr, cc]
    return np.fft.rfft2(pad).real
