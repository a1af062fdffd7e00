"""Fusion quality metrics.

Blind metrics score a fused slice against its two source views:
information transfer (q_mi), gradient preservation (q_g), and a
saliency-weighted local quality index (q_s).  Reference metrics emse
and ssim compare against ground truth when one exists.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

# gradient-preservation sigmoid constants, as published with the metric
QG_GAMMA_G = 0.9994
QG_KAPPA_G = -15.0
QG_SIGMA_G = 0.5
QG_GAMMA_A = 0.9879
QG_KAPPA_A = -22.0
QG_SIGMA_A = 0.8

_Q0_C = 1e-8


@dataclass
class MetricsReport:
    """Per-slice metric values; emse and ssim only with ground truth."""

    q_mi: float
    q_g: float
    q_s: float
    emse: float | None = None
    ssim: float | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -1.0 - 1e-9 <= self.q_s <= 1.0 + 1e-9:
            raise ValueError(f"q_s out of range: {self.q_s}")
        if not 0.0 <= self.q_g <= 1.0:
            raise ValueError(f"q_g out of range: {self.q_g}")
        if self.emse is not None and self.emse < 0:
            raise ValueError(f"emse negative: {self.emse}")
        if self.ssim is not None and not -1.0 - 1e-9 <= self.ssim <= 1.0 + 1e-9:
            raise ValueError(f"ssim out of range: {self.ssim}")


def _check_pair(x, y, name_x, name_y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"{name_x} shape {x.shape} != {name_y} shape {y.shape}")
    return x, y


def emse(fused, gt) -> float:
    """Mean squared error against ground truth."""
    fused, gt = _check_pair(fused, gt, "fused", "gt")
    d = fused - gt
    return float(np.mean(d * d))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    offs = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offs ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(fused, gt, size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local structural similarity, Gaussian-weighted windows.

    11x11 window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1;
    window statistics use the weighted first/second moments and the map
    is averaged over fully valid window positions only.
    """
    x, y = _check_pair(fused, gt, "fused", "gt")
    if min(x.shape) < size:
        raise ValueError(f"image smaller than the {size}x{size} ssim window")
    kernel = _gaussian_kernel(size, sigma)

    def win(img):
        return signal.convolve2d(img, kernel, mode="valid")

    mu_x = win(x)
    mu_y = win(y)
    sxx = win(x * x) - mu_x * mu_x
    syy = win(y * y) - mu_y * mu_y
    sxy = win(x * y) - mu_x * mu_y
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _mi_pair(x, y, bins: int):
    """(mutual information, H(x), H(y)) in bits from a joint histogram
    with equal-width bins on [0, 1]."""
    joint, _, _ = np.histogram2d(x.ravel(), y.ravel(), bins=bins,
                                 range=[[0.0, 1.0], [0.0, 1.0]])
    p = joint / joint.sum()
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    hx = _entropy_bits(px)
    hy = _entropy_bits(py)
    hxy = _entropy_bits(p.ravel())
    return hx + hy - hxy, hx, hy


def q_mi(a, b, fused, bins: int = 256) -> float:
    """Normalized information transfer from both inputs to the fused
    image: 2*[MI(a,f)/(H(a)+H(f)) + MI(b,f)/(H(b)+H(f))], in bits.

    A zero entropy sum contributes 0 for that input (degenerate images).
    """
    value, _ = _q_mi_flagged(a, b, fused, bins)
    return value


def _q_mi_flagged(a, b, fused, bins):
    a, fused = _check_pair(a, fused, "a", "fused")
    b, fused = _check_pair(b, fused, "b", "fused")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    total = 0.0
    degenerate = False
    for x in (a, b):
        mi, hx, hf = _mi_pair(x, fused, bins)
        if hx + hf > 0:
            total += mi / (hx + hf)
        else:
            degenerate = True
    return 2.0 * total, degenerate


def _sobel_fields(img):
    gy = ndimage.sobel(img, axis=0, mode="reflect")
    gx = ndimage.sobel(img, axis=1, mode="reflect")
    mag = np.hypot(gy, gx)
    ang = np.arctan2(gy, gx)
    return mag, ang


def _axial_agreement(ang_x, ang_f):
    """Orientation agreement in [0, 1], treating angles as axial
    (undirected) so opposite gradients count as aligned."""
    d = np.abs(ang_x - ang_f) % np.pi
    d = np.minimum(d, np.pi - d)
    return 1.0 - d / (np.pi / 2.0)


def _preservation(mag_x, ang_x, mag_f, ang_f):
    hi = np.maximum(mag_x, mag_f)
    lo = np.minimum(mag_x, mag_f)
    g = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)
    a = _axial_agreement(ang_x, ang_f)
    qg = QG_GAMMA_G / (1.0 + np.exp(QG_KAPPA_G * (g - QG_SIGMA_G)))
    qa = QG_GAMMA_A / (1.0 + np.exp(QG_KAPPA_A * (a - QG_SIGMA_A)))
    return qg * qa


def q_g(a, b, fused) -> float:
    """Gradient preservation: per-pixel sigmoid scores of relative Sobel
    strength and axial orientation agreement, weighted by each input's
    gradient magnitude.  Returns 0 when both inputs have no gradients.
    """
    value, _ = _q_g_flagged(a, b, fused)
    return value


def _q_g_flagged(a, b, fused):
    a, fused = _check_pair(a, fused, "a", "fused")
    b, fused = _check_pair(b, fused, "b", "fused")
    mag_a, ang_a = _sobel_fields(a)
    mag_b, ang_b = _sobel_fields(b)
    mag_f, ang_f = _sobel_fields(fused)
    weight = mag_a + mag_b
    total = float(weight.sum())
    if total == 0:
        return 0.0, True
    qaf = _preservation(mag_a, ang_a, mag_f, ang_f)
    qbf = _preservation(mag_b, ang_b, mag_f, ang_f)
    value = float((qaf * mag_a + qbf * mag_b).sum() / total)
    return min(max(value, 0.0), 1.0), False


def _window_stats(img, size):
    mean = ndimage.uniform_filter(img, size=size, mode="constant")
    sq = ndimage.uniform_filter(img * img, size=size, mode="constant")
    return mean, sq


def q_s(a, b, fused, window: int = 7) -> float:
    """Saliency-weighted local quality: per window, a similarity index
    against each input is mixed by the inputs' relative variance.

    Windows are the fully inside positions of an odd-sized square; a
    window where both inputs have zero variance weighs them equally.
    """
    a, fused = _check_pair(a, fused, "a", "fused")
    b, fused = _check_pair(b, fused, "b", "fused")
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    if min(a.shape) < window:
        raise ValueError(f"image smaller than the {window}x{window} q_s window")
    half = window // 2
    crop = (slice(half, a.shape[0] - half), slice(half, a.shape[1] - half))

    def stats(img):
        mean, sq = _window_stats(img, window)
        return mean[crop], sq[crop]

    m_a, s_a = stats(a)
    m_b, s_b = stats(b)
    m_f, s_f = stats(fused)
    maf = ndimage.uniform_filter(a * fused, size=window, mode="constant")[crop]
    mbf = ndimage.uniform_filter(b * fused, size=window, mode="constant")[crop]

    var_a = s_a - m_a * m_a
    var_b = s_b - m_b * m_b
    var_f = s_f - m_f * m_f
    cov_af = maf - m_a * m_f
    cov_bf = mbf - m_b * m_f

    def q0(mx, vx, mf, vf, cxf):
        num = (2.0 * mx * mf + _Q0_C) * (2.0 * cxf + _Q0_C)
        den = (mx * mx + mf * mf + _Q0_C) * (vx + vf + _Q0_C)
        return num / den

    q0a = q0(m_a, var_a, m_f, var_f, cov_af)
    q0b = q0(m_b, var_b, m_f, var_f, cov_bf)
    tot = var_a + var_b
    lam = np.where(tot > 0, var_a / np.where(tot > 0, tot, 1.0), 0.5)
    value = float(np.mean(lam * q0a + (1.0 - lam) * q0b))
    return min(max(value, -1.0), 1.0)


def evaluate_pair(a, b, fused, gt=None, bins: int = 256, window: int = 7)\
        -> MetricsReport:
    """All blind metrics for one fused slice, plus reference metrics
    when ground truth is given; degenerate-input conventions land in
    flags."""
    qmi, mi_flag = _q_mi_flagged(a, b, fused, bins)
    qg, qg_flag = _q_g_flagged(a, b, fused)
    qs = q_s(a, b, fused, window)
    flags = {}
    if mi_flag:
        flags["q_mi_zero_entropy"] = True
    if qg_flag:
        flags["q_g_zero_gradients"] = True
    e = s = None
    if gt is not None:
        e = emse(fused, gt)
        s = ssim(fused, gt)
    return MetricsReport(q_mi=qmi, q_g=qg, q_s=qs, emse=e, ssim=s, flags=flags)
