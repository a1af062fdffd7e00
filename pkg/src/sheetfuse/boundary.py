"""Focus-defocus boundary estimation by alternating EM.

Per column, the likelihood of a candidate boundary row is an
attenuation-weighted sum of each view's focus scores over its side of
the split; a local polynomial prior ties neighboring columns together.
The E-step maximizes each column's penalized clarity by exhaustive scan
over candidate rows; the M-step refits the local polynomials (and the
attenuation weights follow the new boundary).  Updates are Jacobi
style: every column reads the previous iteration's fit, so results do
not depend on column order and parallel evaluation is safe.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from sheetfuse.geometry import IncidentProfile


@dataclass
class EmConfig:
    """Boundary-estimation tunables.

    lambda_ is the clarity/smoothness trade-off (0 disables the prior);
    s and q are the fit window half-width and polynomial degree;
    iteration stops when no column moves more than tol rows.
    """

    lambda_: float = 0.5
    s: int = 10
    q: int = 2
    max_iters: int = 50
    tol: int = 0

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be >= 0")
        if self.s < 1:
            raise ValueError("window half-width s must be >= 1")
        if not 0 <= self.q <= 2 * self.s:
            raise ValueError("polynomial degree q must be in [0, 2s]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


@dataclass
class BoundaryCurve:
    """Per-column changeover rows with diagnostics."""

    omega: np.ndarray
    valid: np.ndarray
    objective_trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


@dataclass
class PolyFitParams:
    """Window polynomial fits for every column of one boundary state."""

    coeffs: dict
    fitted: np.ndarray
    resid_sq: np.ndarray
    constrained: np.ndarray
    s: int
    q: int


def _omega_array(omega):
    if isinstance(omega, BoundaryCurve):
        return np.asarray(omega.omega)
    return np.asarray(omega)


def attenuation_profile(profile: IncidentProfile, omega, rows: int) -> np.ndarray:
    """Piecewise-linear photon-path weights for one boundary state.

    Above the boundary (view a territory) the weight falls from 1 at the
    entry row p_u to 0.5 approaching the boundary; at and below it (view
    b territory) the weight falls from 1 at the boundary to 0.5 at the
    far entry row p_l.  Outside [p_u, p_l] and in invalid columns the
    weight is 0.  Degenerate cases: a boundary at p_l leaves only that
    row in the lower branch, with weight 0.5; single-row samples get
    weight 1.
    """
    w = _omega_array(omega).astype(np.int64)
    p_u = profile.p_u[None, :]
    p_l = profile.p_l[None, :]
    wv = w[None, :]
    j = np.arange(rows)[:, None]

    with np.errstate(divide="ignore", invalid="ignore"):
        upper = 1.0 - 0.5 * (j - p_u) / np.where(wv > p_u, wv - p_u, 1)
        lower = np.where(p_l > wv,
                         0.5 + 0.5 * (p_l - j) / np.where(p_l > wv, p_l - wv, 1),
                         0.5)
    att = np.zeros((rows, w.shape[0]))
    in_upper = (j >= p_u) & (j < wv)
    in_lower = (j >= wv) & (j <= p_l)
    att[in_upper] = upper[in_upper]
    att[in_lower] = lower[in_lower]
    single = (profile.p_u == profile.p_l)[None, :] & (j == p_u)
    att[single & in_lower] = 1.0
    att[:, ~profile.valid] = 0.0
    return np.clip(att, 0.0, 1.0)


def column_clarity(fa, fb, att, omega_i: int, i: int) -> float:
    """Attenuation-weighted clarity of column i split at row omega_i:
    view a scores above (rows <= omega_i), view b scores below."""
    fa = np.asarray(fa)
    fb = np.asarray(fb)
    cut = int(omega_i) + 1
    top = float(att[:cut, i] @ fa[:cut, i])
    bot = float(att[cut:, i] @ fb[cut:, i])
    return top + bot


def clarity_curve(fa, fb, profile: IncidentProfile) -> np.ndarray:
    """Clarity of every candidate boundary row, all columns at once.

    Returns a (rows, cols) array where entry [r, i] equals
    column_clarity at boundary r with the attenuation induced by r;
    entries outside [p_u, p_l] or in invalid columns are -inf.  Runs in
    O(rows) per column via prefix/suffix sums; an explicit-summation
    equivalence test pins it to the direct definition.
    """
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    rows, cols = fa.shape
    p_u = profile.p_u[None, :]
    p_l = profile.p_l[None, :]
    j = np.arange(rows)[:, None]
    inside = (j >= p_u) & (j <= p_l) & profile.valid[None, :]
    fam = np.where(inside, fa, 0.0)
    fbm = np.where(inside, fb, 0.0)

    za = np.cumsum(fam, axis=0)
    ja = np.cumsum(j * fam, axis=0)
    zb = np.cumsum(fbm[::-1], axis=0)[::-1]
    kb = np.cumsum((j * fbm)[::-1], axis=0)[::-1]
    za_prev = np.vstack([np.zeros((1, cols)), za[:-1]])
    ja_prev = np.vstack([np.zeros((1, cols)), ja[:-1]])
    zb_next = np.vstack([zb[1:], np.zeros((1, cols))])
    kb_next = np.vstack([kb[1:], np.zeros((1, cols))])

    with np.errstate(divide="ignore", invalid="ignore"):
        # rows above the candidate: weights 1 - 0.5*(j - p_u)/(w - p_u)
        apart = np.where(
            j > p_u,
            za_prev - 0.5 * (ja_prev - p_u * za_prev) / np.where(j > p_u, j - p_u, 1),
            0.0)
        # rows below: weights 0.5 + 0.5*(p_l - j)/(p_l - w)
        bpart = np.where(
            j < p_l,
            0.5 * zb_next + 0.5 * (p_l * zb_next - kb_next) / np.where(j < p_l, p_l - j, 1),
            0.0)
    # the candidate row itself joins the a-side with the boundary weight:
    # 1 in general, 0.5 when the boundary sits at p_l of a multi-row column
    at_w = np.where((j == p_l) & (p_l > p_u), 0.5, 1.0)
    out = apart + at_w * fam + bpart
    return np.where(inside, out, -np.inf)


def init_boundary(fa, fb, profile: IncidentProfile) -> BoundaryCurve:
    """Initial boundary: entry row plus the count of sample rows where
    view a out-scores view b (a proxy for the in-focus span of a)."""
    fa = np.asarray(fa)
    fb = np.asarray(fb)
    rows = fa.shape[0]
    j = np.arange(rows)[:, None]
    inside = (j >= profile.p_u[None, :]) & (j <= profile.p_l[None, :])
    count = ((fa > fb) & inside).sum(axis=0)
    omega = np.clip(profile.p_u + count, profile.p_u, profile.p_l).astype(np.int64)
    omega[~profile.valid] = 0
    return BoundaryCurve(omega=omega, valid=profile.valid.copy())


def fit_window_poly(omega, i: int, s: int, q: int):
    """Least-squares polynomial over the boundary window centered at i.

    Fits degree-q coefficients (descending powers of the centered column
    offset) to the boundary rows of valid columns within [i-s, i+s],
    shrunk at the image edges.  Returns the coefficient vector, or None
    when fewer than q + 1 valid columns remain (column unconstrained).
    """
    curve = omega if isinstance(omega, BoundaryCurve) else None
    vals_all = _omega_array(omega).astype(np.float64)
    valid = curve.valid if curve is not None else np.ones(vals_all.shape[0], bool)
    lo, hi = max(0, i - s), min(vals_all.shape[0], i + s + 1)
    sel = valid[lo:hi]
    if int(sel.sum()) < q + 1:
        return None
    deltas = (np.arange(lo, hi) - i)[sel].astype(np.float64)
    v = np.vander(deltas, q + 1)
    return np.linalg.pinv(v) @ vals_all[lo:hi][sel]


def smoothness_penalty(omega, c, i: int) -> float:
    """Squared residual of column i's window against its polynomial fit."""
    if isinstance(c, PolyFitParams):
        if not c.constrained[i]:
            return 0.0
        coeff, s, q = c.coeffs[i], c.s, c.q
    else:
        coeff, s, q = c, None, None
        if coeff is None:
            return 0.0
    curve = omega if isinstance(omega, BoundaryCurve) else None
    vals_all = _omega_array(omega).astype(np.float64)
    valid = curve.valid if curve is not None else np.ones(vals_all.shape[0], bool)
    if s is None:
        raise ValueError("pass PolyFitParams or use fit_window_poly's s/q context")
    lo, hi = max(0, i - s), min(vals_all.shape[0], i + s + 1)
    sel = valid[lo:hi]
    deltas = (np.arange(lo, hi) - i)[sel].astype(np.float64)
    v = np.vander(deltas, len(coeff))
    r = vals_all[lo:hi][sel] - v @ coeff
    return float(r @ r)


def _fit_all(omega_vals, valid, s: int, q: int) -> PolyFitParams:
    """Window fits for every column; pinv cached per window pattern."""
    n = omega_vals.shape[0]
    fitted = np.zeros(n)
    resid = np.zeros(n)
    constrained = np.zeros(n, dtype=bool)
    coeffs = {}
    cache = {}
    vals_f = omega_vals.astype(np.float64)
    for i in range(n):
        lo, hi = max(0, i - s), min(n, i + s + 1)
        sel = valid[lo:hi]
        deltas = (np.arange(lo, hi) - i)[sel].astype(np.float64)
        if deltas.size < q + 1:
            continue
        key = (lo - i, hi - i, sel.tobytes())
        entry = cache.get(key)
        if entry is None:
            v = np.vander(deltas, q + 1)
            entry = (np.linalg.pinv(v), v)
            cache[key] = entry
        pinv, v = entry
        vals = vals_f[lo:hi][sel]
        c = pinv @ vals
        r = vals - v @ c
        coeffs[i] = c
        fitted[i] = c[-1]
        resid[i] = float(r @ r)
        constrained[i] = True
    return PolyFitParams(coeffs=coeffs, fitted=fitted, resid_sq=resid,
                         constrained=constrained, s=s, q=q)


def _scan_candidates(clar, profile, params, cfg):
    """Penalized exhaustive scan: best candidate row per valid column."""
    rows = clar.shape[0]
    j = np.arange(rows)[:, None]
    if cfg.lambda_ > 0:
        center = np.where(params.constrained, params.fitted, 0.0)[None, :]
        pen = np.where(params.constrained[None, :], (j - center) ** 2, 0.0)
        obj = clar - cfg.lambda_ * pen
    else:
        obj = clar
    # argmax returns the first (smallest-row) maximizer: the tie-break rule
    return np.argmax(obj, axis=0).astype(np.int64)


def e_step(fa, fb, profile: IncidentProfile, omega, c: PolyFitParams,
           cfg: EmConfig) -> BoundaryCurve:
    """One Jacobi sweep: re-maximize every valid column's penalized
    clarity against the frozen polynomial fits c."""
    cur = _omega_array(omega).astype(np.int64).copy()
    clar = clarity_curve(fa, fb, profile)
    best = _scan_candidates(clar, profile, c, cfg)
    cur[profile.valid] = best[profile.valid]
    curve = BoundaryCurve(omega=cur, valid=profile.valid.copy())
    if isinstance(omega, BoundaryCurve):
        curve.objective_trace = list(omega.objective_trace)
    return curve


def normalize_focus_pair(fa, fb):
    """Scale both focus maps by the larger of their 99th percentiles so
    the smoothness trade-off keeps a stable meaning across datasets."""
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    scale = max(float(np.percentile(fa, 99)), float(np.percentile(fb, 99)))
    if scale <= 0:
        return fa.copy(), fb.copy()
    return fa / scale, fb / scale


def em_estimate(fa, fb, profile: IncidentProfile, cfg: EmConfig | None = None)\
        -> BoundaryCurve:
    """Alternate clarity maximization and polynomial refits to a fixed
    point (no column moves more than cfg.tol rows) or max_iters.

    The recorded objective is the total clarity at the current boundary
    minus lambda times the total window-fit residual, appended once per
    iteration (plus the post-init baseline).  Invalid columns are filled
    afterward by linear interpolation between valid neighbors.
    """
    if cfg is None:
        cfg = EmConfig()
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    if fa.shape != fb.shape:
        raise ValueError(f"focus map shapes differ: {fa.shape} vs {fb.shape}")
    if not profile.valid.any():
        raise ValueError("no sample found")

    clar = clarity_curve(fa, fb, profile)
    cols = np.arange(fa.shape[1])

    def objective(om, params):
        data = float(clar[om[profile.valid], cols[profile.valid]].sum())
        return data - cfg.lambda_ * float(params.resid_sq.sum())

    curve = init_boundary(fa, fb, profile)
    omega = curve.omega
    params = _fit_all(omega, profile.valid, cfg.s, cfg.q)
    trace = [objective(omega, params)]
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iters + 1):
        best = _scan_candidates(clar, profile, params, cfg)
        new = omega.copy()
        new[profile.valid] = best[profile.valid]
        moved = int(np.abs(new - omega)[profile.valid].max())
        omega = new
        params = _fit_all(omega, profile.valid, cfg.s, cfg.q)
        trace.append(objective(omega, params))
        if moved <= cfg.tol:
            converged = True
            break

    if (~profile.valid).any():
        omega = omega.copy()
        omega[~profile.valid] = np.rint(
            np.interp(cols[~profile.valid], cols[profile.valid],
                      omega[profile.valid].astype(np.float64))).astype(np.int64)
    return BoundaryCurve(
        omega=omega, valid=profile.valid.copy(), objective_trace=trace,
        diagnostics={"iterations": iterations, "converged": converged})
