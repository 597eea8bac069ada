"""Reweighted least-squares inversion of pair phases into LOS time series and rates.

Pixels are inverted in batches, but every quantity for one pixel is built
from sparse products and per-matrix LAPACK solves, so a pixel's result does
not depend on which other pixels share its batch.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DimensionMismatch, InsufficientEpochs, RankDeficient
from .geomodel import RadarConstants, ViewGeometry, phase_to_displacement
from .pairnet import connected_components, design_matrix
from .robust import TUKEY_C, mad_scale, tukey

WEIGHT_FLOOR = 1e-3
MAX_ITER = 30
WEIGHT_TOL = 1e-6

FLAG_OK = 0
FLAG_NONFINITE = 1
FLAG_SINGULAR = 2


@dataclass
class TimeSeries:
    epochs: list
    displacement_cm: np.ndarray
    sigma_cm: np.ndarray
    ref_index: int = 0
    covariance_cm2: np.ndarray | None = None   # full epoch covariance, when known

    def years(self):
        days = np.array([d.toordinal() for d in self.epochs], dtype=float)
        return (days - days[self.ref_index]) / 365.25


@dataclass(frozen=True)
class VelocityEstimate:
    rate_mm_yr: float
    std_mm_yr: float


@dataclass(frozen=True)
class PixelInversion:
    epoch_phase: np.ndarray   # (n_epochs - 1,) non-reference epochs
    covariance: np.ndarray
    weights: np.ndarray
    residuals: np.ndarray
    n_iter: int


def _colsum(v):
    """Column sums accumulated row by row, so the order never depends on the column count."""
    v = np.asarray(v, dtype=float)
    acc = np.zeros(v.shape[1:])
    for row in v:
        acc += row
    return acc


def reweight(resid, prior, c=TUKEY_C, floor=WEIGHT_FLOOR):
    """Biweight factors on MAD-normalised residuals, scaled to a maximum of 1.

    ``resid`` and ``prior`` are (pairs,) or (pairs, pixels); the scale is
    taken per column.
    """
    resid = np.asarray(resid, dtype=float)
    s = np.atleast_1d(mad_scale(resid, axis=0))
    tiny = 1e-12 * np.maximum(1.0, np.max(np.abs(resid), axis=0, initial=0.0))
    s = np.maximum(s, tiny)
    f = tukey(resid / (c * s))
    top = f.max(axis=0, initial=0.0)
    f = np.where(top > 0, f / np.where(top > 0, top, 1.0), 1.0)
    return np.maximum(prior * f, floor)


def _normal_operators(G):
    """Sparse maps giving G^T diag(w) G (flattened) and G^T v for many columns."""
    G = np.asarray(G, dtype=float)
    m, n = G.shape
    rows, cols, vals = [], [], []
    for k in range(m):
        nz = np.flatnonzero(G[k])
        for a in nz:
            for b in nz:
                rows.append(k)
                cols.append(a * n + b)
                vals.append(G[k, a] * G[k, b])
    S = sparse.csr_matrix((vals, (rows, cols)), shape=(m, n * n))
    return S.T.tocsr(), sparse.csr_matrix(G).T.tocsr(), sparse.csr_matrix(G)


def invert_pixels(phase, G, weights=None, reweighting="tukey", max_iter=MAX_ITER, tol=WEIGHT_TOL):
    """Batched inversion of (pairs, pixels) phases with design matrix ``G``.

    Returns (epoch_phase (pixels, n), covariance (pixels, n, n),
    weights (pairs, pixels), residuals (pairs, pixels), n_iter (pixels,)).
    """
    phase = np.atleast_2d(np.asarray(phase, dtype=float))
    if phase.shape[0] != G.shape[0]:
        phase = phase.reshape(G.shape[0], -1)
    m, P = phase.shape
    n = G.shape[1]
    if np.linalg.matrix_rank(np.asarray(G, dtype=float)) < n:
        raise RankDeficient(f"design matrix rank below {n}; the pair network is disconnected")
    prior = np.ones_like(phase) if weights is None else np.maximum(np.asarray(weights, float), WEIGHT_FLOOR)
    if prior.shape != phase.shape:
        raise DimensionMismatch("weights must match phase")
    StT, Gt, Gs = _normal_operators(G)

    def solve(w, cols):
        A = (StT @ w[:, cols]).T.reshape(len(cols), n, n)
        b = (Gt @ (w[:, cols] * phase[:, cols])).T
        x = np.linalg.solve(A, b[..., None])[..., 0]
        return x, A

    w = prior.copy()
    x, A = solve(w, np.arange(P))
    n_iter = np.zeros(P, dtype=np.int64)
    if reweighting == "tukey":
        active = np.arange(P)
        for it in range(1, max_iter + 1):
            r = phase[:, active] - (Gs @ x[active].T)
            w_new = reweight(r, prior[:, active])
            change = np.max(np.abs(w_new - w[:, active]), axis=0)
            w[:, active] = w_new
            x[active], A[active] = solve(w, active)
            n_iter[active] = it
            active = active[change >= tol]
            if not len(active):
                break
    elif reweighting != "none":
        raise ValueError(f"unknown reweighting scheme {reweighting!r}")
    resid = phase - (Gs @ x.T)
    dof = m - n
    if dof > 0:
        s2 = _colsum(w * resid ** 2) / dof
    else:
        s2 = np.zeros(P)
    cov = np.linalg.inv(A) * s2[:, None, None]
    return x, cov, w, resid, n_iter


def invert_pixel(pair_phase, G, weights=None, reweighting="tukey") -> PixelInversion:
    x, cov, w, r, it = invert_pixels(np.asarray(pair_phase, float)[:, None], G,
                                     None if weights is None else np.asarray(weights, float)[:, None],
                                     reweighting)
    return PixelInversion(x[0], cov[0], w[:, 0], r[:, 0], int(it[0]))


def fit_velocities(years, disp_cm, sigma_cm=None, cov_cm2=None):
    """Weighted straight-line fits, one per row of ``disp_cm``.

    Weights are 1/sigma^2; zero sigmas (the reference epoch) take the
    smallest positive sigma of that row. With ``cov_cm2`` (rows, epochs,
    epochs) the rate std is the covariance pushed through the slope
    weights; otherwise it comes from the residual scatter with n - 2
    degrees of freedom. Returns (rate mm/yr, std mm/yr).
    """
    t = np.asarray(years, dtype=float)
    d = np.atleast_2d(np.asarray(disp_cm, dtype=float))
    if len(t) < 2:
        raise InsufficientEpochs(f"need at least 2 epochs, got {len(t)}")
    if sigma_cm is None:
        w = np.ones_like(d)
    else:
        s = np.atleast_2d(np.asarray(sigma_cm, dtype=float)).copy()
        pos = np.where(s > 0, s, np.inf)
        smin = pos.min(axis=1, keepdims=True)
        smin = np.where(np.isfinite(smin), smin, 1.0)
        s = np.where(s > 0, s, smin)
        w = 1.0 / s ** 2
    sw = _colsum(w.T)
    tm = _colsum((w * t).T) / sw
    dm = _colsum((w * d).T) / sw
    tc = t[None, :] - tm[:, None]
    sxx = _colsum((w * tc ** 2).T)
    a = w * tc / sxx[:, None]          # slope = sum_k a_k d_k
    slope = _colsum((a * d).T)
    n = len(t)
    if cov_cm2 is not None:
        ca = np.matmul(np.asarray(cov_cm2, dtype=float), a[:, :, None])[:, :, 0]
        std = np.sqrt(np.maximum(_colsum((a * ca).T), 0.0))
    elif n > 2:
        resid = d - dm[:, None] - slope[:, None] * tc
        s2 = _colsum((w * resid ** 2).T) / (n - 2)
        std = np.sqrt(s2 / sxx)
    else:
        std = np.zeros(len(d))
    return slope * 10.0, std * 10.0


def fit_velocity(ts: TimeSeries) -> VelocityEstimate:
    if len(ts.epochs) < 2:
        raise InsufficientEpochs(f"need at least 2 epochs, got {len(ts.epochs)}")
    cov = None if ts.covariance_cm2 is None else np.asarray(ts.covariance_cm2)[None]
    rate, std = fit_velocities(ts.years(), ts.displacement_cm[None, :], ts.sigma_cm[None, :], cov)
    return VelocityEstimate(float(rate[0]), float(std[0]))


@dataclass
class DisplacementProduct:
    pixel_id: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    incidence_deg: np.ndarray
    velocity_mm_yr: np.ndarray
    velocity_std_mm_yr: np.ndarray
    epochs: list = field(default_factory=list)
    displacement_cm: np.ndarray | None = None   # (pixels, epochs)
    sigma_cm: np.ndarray | None = None
    flags: np.ndarray | None = None
    excluded_epochs: list = field(default_factory=list)

    def __len__(self):
        return len(self.pixel_id)

    def years(self):
        days = np.array([d.toordinal() for d in self.epochs], dtype=float)
        return (days - days[0]) / 365.25

    def shifted(self, offsets_mm_yr):
        """Copy with ``offsets_mm_yr`` (scalar or per pixel) added to the rates.

        Time series receive the matching linear trend so rates and series stay
        consistent; standard deviations are untouched.
        """
        off = np.broadcast_to(np.asarray(offsets_mm_yr, dtype=float), self.velocity_mm_yr.shape)
        disp = self.displacement_cm
        if disp is not None and len(self.epochs):
            disp = disp + off[:, None] * self.years()[None, :] / 10.0
        return replace(self, velocity_mm_yr=self.velocity_mm_yr + off, displacement_cm=disp)

    def take(self, idx):
        def sel(a):
            return None if a is None else a[idx]
        return replace(self, pixel_id=self.pixel_id[idx], x=self.x[idx], y=self.y[idx],
                       lon=self.lon[idx], lat=self.lat[idx], incidence_deg=self.incidence_deg[idx],
                       velocity_mm_yr=self.velocity_mm_yr[idx],
                       velocity_std_mm_yr=self.velocity_std_mm_yr[idx],
                       displacement_cm=sel(self.displacement_cm), sigma_cm=sel(self.sigma_cm),
                       flags=sel(self.flags))


def invert_stack(stack, geom: ViewGeometry = ViewGeometry(), radar: RadarConstants = RadarConstants(),
                 ref_index=0, reweighting="tukey", max_iter=MAX_ITER, chunk=512) -> DisplacementProduct:
    """Invert every pixel of an unwrapped, corrected stack.

    A disconnected pair network is reduced to its largest component; the
    epochs left out are listed in ``excluded_epochs``. Pixels with
    non-finite phase are flagged and given NaN results rather than
    aborting the run.
    """
    n_epochs = len(stack.catalog)
    pairs = stack.pairs
    comps = connected_components(pairs, n_epochs)
    keep_epochs = max(comps, key=lambda c: (len(c), -c[0]))
    excluded = sorted(set(range(n_epochs)) - set(keep_epochs))
    if excluded:
        keep = set(keep_epochs)
        rows = [k for k, (i, j) in enumerate(pairs.pairs) if i in keep and j in keep]
        stack = stack.take_pairs(rows)
        remap = {e: k for k, e in enumerate(keep_epochs)}
        pairs = replace(stack.pairs, pairs=tuple((remap[i], remap[j]) for i, j in stack.pairs.pairs))
        if ref_index not in keep:
            ref_index = keep_epochs[0]
        ref_local = remap[ref_index]
    else:
        ref_local = ref_index
    n = len(keep_epochs)
    G = design_matrix(pairs, n, ref_local)
    P = stack.n_pixels
    epoch_phase = np.full((P, n), np.nan)
    epoch_var = np.full((P, n), np.nan)
    flags = np.zeros(P, dtype=np.int64)
    good = np.all(np.isfinite(stack.phase), axis=0) & np.all(np.isfinite(stack.weights), axis=0)
    flags[~good] = FLAG_NONFINITE
    cols = [k for k in range(n) if k != ref_local]
    epochs = [stack.catalog[e].date for e in keep_epochs]
    days = np.array([d.toordinal() for d in epochs], dtype=float)
    years = (days - days[ref_local]) / 365.25
    cm_per_rad = radar.wavelength_m / (4 * np.pi) * 100.0
    rate = np.full(P, np.nan)
    std = np.full(P, np.nan)
    idx_good = np.flatnonzero(good)
    for start in range(0, len(idx_good), chunk):
        sel = idx_good[start:start + chunk]
        try:
            x, cov, *_ = invert_pixels(stack.phase[:, sel], G, stack.weights[:, sel], reweighting,
                                       max_iter=max_iter)
        except np.linalg.LinAlgError:
            flags[sel] = FLAG_SINGULAR
            continue
        epoch_phase[np.ix_(sel, cols)] = x
        epoch_phase[sel, ref_local] = 0.0
        epoch_var[np.ix_(sel, cols)] = np.diagonal(cov, axis1=1, axis2=2)
        epoch_var[sel, ref_local] = 0.0
        full = np.zeros((len(sel), n, n))
        full[np.ix_(np.arange(len(sel)), cols, cols)] = cov * cm_per_rad ** 2
        rate[sel], std[sel] = fit_velocities(
            years, phase_to_displacement(epoch_phase[sel], radar) + 0.0,
            np.sqrt(epoch_var[sel]) * cm_per_rad, full)
    disp = phase_to_displacement(epoch_phase, radar) + 0.0
    sigma = np.sqrt(epoch_var) * cm_per_rad
    px = stack.pixels
    return DisplacementProduct(
        pixel_id=np.arange(P), x=px.x.copy(), y=px.y.copy(), lon=px.lon.copy(), lat=px.lat.copy(),
        incidence_deg=px.incidence_deg.copy(), velocity_mm_yr=rate, velocity_std_mm_yr=std,
        epochs=epochs, displacement_cm=disp, sigma_cm=sigma, flags=flags,
        excluded_epochs=[stack.catalog[e].date for e in excluded],
    )


def timeseries_text(product: DisplacementProduct) -> str:
    """Text table ``pixel_id,epoch,displacement_cm,sigma_cm`` (one row per pixel-epoch)."""
    lines = ["# insarchain-timeseries v1", "pixel_id,epoch,displacement_cm,sigma_cm"]
    for p in range(len(product)):
        pid = int(product.pixel_id[p])
        for e, day in enumerate(product.epochs):
            lines.append(f"{pid},{day.isoformat()},{product.displacement_cm[p, e]:.6f},"
                         f"{product.sigma_cm[p, e]:.6f}")
    return "\n".join(lines) + "\n"


def write_timeseries(product: DisplacementProduct, path) -> None:
    Path(path).write_text(timeseries_text(product), encoding="utf-8")


def read_timeseries(path):
    """Parse a time-series table into {pixel_id: (dates, displacement_cm, sigma_cm)}."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#") or line.startswith("pixel_id"):
            continue
        pid, day, d, s = line.split(",")
        rec = out.setdefault(int(pid), ([], [], []))
        rec[0].append(dt.date.fromisoformat(day))
        rec[1].append(float(d))
        rec[2].append(float(s))
    return {k: (v[0], np.array(v[1]), np.array(v[2])) for k, v in out.items()}


def save_product(product: DisplacementProduct, path) -> None:
    arrays = dict(
        format=np.array("insarchain-product"), version=np.array(1),
        pixel_id=product.pixel_id, x=product.x, y=product.y, lon=product.lon, lat=product.lat,
        incidence_deg=product.incidence_deg, velocity_mm_yr=product.velocity_mm_yr,
        velocity_std_mm_yr=product.velocity_std_mm_yr,
        epochs=np.array([d.isoformat() for d in product.epochs]),
        excluded_epochs=np.array([d.isoformat() for d in product.excluded_epochs]),
    )
    for name in ("displacement_cm", "sigma_cm", "flags"):
        val = getattr(product, name)
        if val is not None:
            arrays[name] = val
    np.savez(path, **arrays)


def load_product(path) -> DisplacementProduct:
    with np.load(path, allow_pickle=False) as z:
        if "format" not in z or str(z["format"]) != "insarchain-product":
            raise ValueError(f"{path}: not an insarchain product archive")
        get = lambda k: z[k] if k in z else None  # noqa: E731
        return DisplacementProduct(
            z["pixel_id"], z["x"], z["y"], z["lon"], z["lat"], z["incidence_deg"],
            z["velocity_mm_yr"], z["velocity_std_mm_yr"],
            [dt.date.fromisoformat(str(s)) for s in z["epochs"]],
            get("displacement_cm"), get("sigma_cm"), get("flags"),
            [dt.date.fromisoformat(str(s)) for s in z["excluded_epochs"]],
        )
