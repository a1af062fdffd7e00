"""Pixel-level focus measure from directional band contrast."""
from __future__ import annotations

import numpy as np


def focus_measure(coeffs, epsilon: float = 1e-3) -> np.ndarray:
    """Per-pixel clarity score from a directional decomposition.

    Each direction band contributes its coefficient magnitude relative
    to the local lowpass baseline, weighted by the per-pixel standard
    deviation of the direction magnitudes at that scale.  Isotropic
    content (noise) has near-equal magnitudes across directions, so the
    spread factor suppresses it; oriented in-focus detail scores high.

    Parameters
    ----------
    coeffs : NsctCoeffs
        Output of nsct_decompose.
    epsilon : float
        Divider floor stabilizing the baseline ratio on dark pixels.

    Returns
    -------
    (M, N) float array, nonnegative.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    denom = np.maximum(np.abs(coeffs.lowpass), epsilon)
    total = np.zeros_like(coeffs.lowpass)
    for scale_bands in coeffs.bands:
        mags = np.abs(np.stack(scale_bands))
        # population std across the direction axis; zero when all
        # direction magnitudes coincide at a pixel
        spread = mags.std(axis=0)
        total += mags.sum(axis=0) / denom * spread
    return total
