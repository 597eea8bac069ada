"""Topography-correlated atmospheric delay and orbital ramp corrections.

The sparse pixel set rules out a dyadic 2-D wavelet transform, so the
multiresolution split uses iterated Gaussian-weighted local-linear smoothing
on the scattered pixels: ``s_0`` is the signal, ``s_l`` smooths ``s_(l-1)``
at scale ``base_scale * 2**(l-1)``, detail band ``l`` is ``s_(l-1) - s_l``
and the last band is ``s_L``. The bands telescope back to the signal, and a
plane passes every smoother unchanged, so it lands in the coarse band alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import ConstantElevation, DegenerateGeometry, InsufficientPixels
from .robust import robust_lstsq

KERNEL_CUTOFF = 3.0


class MultiresOperator:
    """Precomputed smoothing operators for one pixel layout."""

    def __init__(self, coords, levels=4, base_scale=2.0):
        coords = np.asarray(coords, dtype=float)
        if levels < 1:
            raise ValueError("levels must be >= 1")
        if len(coords) < 2 ** levels:
            raise InsufficientPixels(
                f"{len(coords)} pixels cannot support {levels} levels (need {2 ** levels})"
            )
        self.levels = levels
        self.coords = coords
        self.scales = [base_scale * 2 ** l for l in range(levels)]
        tree = cKDTree(coords)
        n = len(coords)
        self._smoothers = []
        for sigma in self.scales:
            self._smoothers.append(_local_linear(coords, tree, sigma))

    def decompose(self, signal):
        """Bands for a (n_pixels,) signal or a (n_pixels, n_signals) matrix."""
        s = np.asarray(signal, dtype=float)
        bands = []
        for W in self._smoothers:
            smooth = W @ s
            bands.append(s - smooth)
            s = smooth
        bands.append(s)
        return bands


def _local_linear(coords, tree, sigma):
    """Row-stochastic smoother that fits a weighted plane around every pixel."""
    n = len(coords)
    d = tree.sparse_distance_matrix(tree, KERNEL_CUTOFF * sigma, output_type="coo_matrix")
    i, j = d.row, d.col
    w = np.exp(-0.5 * (d.data / sigma) ** 2)
    dx = (coords[j, 0] - coords[i, 0]) / sigma
    dy = (coords[j, 1] - coords[i, 1]) / sigma
    basis = np.stack([np.ones_like(dx), dx, dy], axis=1)
    M = np.zeros((n, 3, 3))
    np.add.at(M, i, w[:, None, None] * basis[:, :, None] * basis[:, None, :])
    # pixels whose neighbours are (nearly) collinear fall back to a weighted mean
    ok = np.linalg.det(M) > 1e-6 * M[:, 0, 0] ** 3
    e1 = np.zeros((n, 3))
    e1[:, 0] = 1.0
    coef = np.zeros((n, 3))
    coef[ok] = np.linalg.solve(M[ok], e1[ok][:, :, None])[:, :, 0]
    coef[~ok, 0] = 1.0 / M[~ok, 0, 0]
    vals = w * np.einsum("ek,ek->e", basis, coef[i])
    return sparse.coo_matrix((vals, (i, j)), shape=(n, n)).tocsr()


def multires_decompose(signal, coords, levels=4, base_scale=2.0):
    """Additive multiresolution bands of a signal on scattered pixels (finest first)."""
    return MultiresOperator(coords, levels, base_scale).decompose(signal)


@dataclass(frozen=True)
class AtmoModel:
    band_coeffs: tuple            # ((band_id, K rad/m), ...)
    reconstructed_delay: np.ndarray
    aggregate_coeff: float        # LS slope of the delay against elevation


def _aggregate(delay, elevation):
    e = elevation - elevation.mean()
    den = float(e @ e)
    return float(e @ (delay - delay.mean()) / den) if den > 0 else 0.0


def estimate_topo_delay(phase, elevation, coords=None, levels=4, operator=None, robust=True):
    """Band-wise transfer coefficients of elevation into phase; returns an :class:`AtmoModel`.

    The phase is regressed jointly on every elevation band plus an offset
    and a plane (the plane soaks up orbital ramps, which sit in the coarse
    band). With orthogonal wavelet bands this is the same as one regression
    per band; our bands overlap, and the joint fit keeps a second pass on the
    corrected phase at zero. Bands with no elevation content get K = 0.

    Pass either ``coords`` or a prebuilt ``operator``. The correction is
    ``phase - model.reconstructed_delay``.
    """
    phase = np.asarray(phase, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    if phase.shape != elevation.shape:
        raise ValueError("phase and elevation must cover the same pixels")
    if np.ptp(elevation) <= 1e-9 * max(1.0, np.abs(elevation).max()):
        warnings.warn("elevation is constant; topographic delay set to zero", ConstantElevation,
                      stacklevel=2)
        return AtmoModel(tuple((b, 0.0) for b in range(levels + 1)), np.zeros_like(phase), 0.0)
    op = operator if operator is not None else MultiresOperator(coords, levels)
    e_bands = op.decompose(elevation)
    nuisance = np.column_stack([np.ones_like(phase), op.coords])
    # a band counts only if it is not a plane in disguise
    proj = nuisance @ np.linalg.lstsq(nuisance, np.column_stack(e_bands), rcond=None)[0]
    spread = np.sum((np.column_stack(e_bands) - proj) ** 2, axis=0)
    used = [b for b in range(len(e_bands)) if spread[b] > 1e-12 * np.sum((elevation - elevation.mean()) ** 2)]
    X = np.column_stack([e_bands[b] for b in used] + [nuisance])
    if robust:
        beta = robust_lstsq(X, phase)[0]
    else:
        beta = np.linalg.lstsq(X, phase, rcond=None)[0]
    k = np.zeros(len(e_bands))
    k[used] = beta[:len(used)]
    delay = np.zeros_like(phase)
    for b in used:
        delay += k[b] * e_bands[b]
    return AtmoModel(tuple((b, float(k[b])) for b in range(len(e_bands))), delay,
                     _aggregate(delay, elevation))


@dataclass(frozen=True)
class RampModel:
    coeffs: tuple     # (a0, a1, a2) or (a0, a1, a2, a3) with a3 multiplying x*y

    def evaluate(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        return _ramp_design(coords, len(self.coeffs) == 4) @ np.asarray(self.coeffs)


def _ramp_design(coords, cross):
    x, y = coords[:, 0], coords[:, 1]
    cols = [np.ones_like(x), x, y]
    if cross:
        cols.append(x * y)
    return np.column_stack(cols)


def estimate_ramp(phase, coords, robust=True, cross_term=False, max_iter=50, tol=1e-8) -> RampModel:
    """Bilinear (optionally with an x*y term) orbital ramp fit."""
    phase = np.asarray(phase, dtype=float)
    coords = np.asarray(coords, dtype=float)
    X = _ramp_design(coords, cross_term)
    if len(phase) < 4 or np.linalg.matrix_rank(X[:, :3]) < 3:
        raise DegenerateGeometry("ramp fit needs at least 4 non-collinear pixels")
    if robust:
        beta = robust_lstsq(X, phase, max_iter=max_iter, tol=tol)[0]
    else:
        beta = np.linalg.lstsq(X, phase, rcond=None)[0]
    return RampModel(tuple(float(b) for b in beta))


def correct_stack(phase, elevation, coords, levels=4, atmosphere=True, orbit=True,
                  robust_orbit=True, cross_term=False):
    """Atmosphere then orbit correction of every row of ``phase`` (n_ifg, n_pixels).

    Returns (corrected, report rows); each report row is a dict with the
    fitted coefficients and residual RMS before and after.
    """
    phase = np.atleast_2d(np.asarray(phase, dtype=float))
    coords = np.asarray(coords, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    op = None
    if atmosphere and np.ptp(elevation) > 0:
        op = MultiresOperator(coords, levels)
    out = np.empty_like(phase)
    report = []
    for q, row in enumerate(phase):
        rec = {"rms_before": float(np.sqrt(np.mean((row - row.mean()) ** 2)))}
        cur = row
        if atmosphere:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConstantElevation)
                atm = estimate_topo_delay(cur, elevation, levels=levels, operator=op)
            cur = cur - atm.reconstructed_delay
            rec["atmo_aggregate_rad_per_m"] = atm.aggregate_coeff
            rec["atmo_band_coeffs"] = [k for _, k in atm.band_coeffs]
        if orbit:
            ramp = estimate_ramp(cur, coords, robust=robust_orbit, cross_term=cross_term)
            cur = cur - ramp.evaluate(coords)
            rec["ramp_coeffs"] = list(ramp.coeffs)
        rec["rms_after"] = float(np.sqrt(np.mean((cur - cur.mean()) ** 2)))
        out[q] = cur
        report.append(rec)
    return out, report
