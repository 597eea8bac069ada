"""Elite (low-noise) pixel selection by temporal coherence.

The model phase used for coherence is built in two passes. First, a
spatial low-pass: each pixel gets the phase of the Gaussian-weighted sum of
its neighbours' phasors (itself excluded), which absorbs atmosphere, ramps
and any per-pair constant. Second, a per-pixel linear-rate fit on the
wrapped residual, found by maximising the periodogram over a velocity grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import DimensionMismatch
from .geomodel import RadarConstants, displacement_to_phase


@dataclass(frozen=True)
class PixelQuality:
    pixel_id: int
    temporal_coherence: float
    selected: bool = False

    def __post_init__(self):
        if not 0.0 <= self.temporal_coherence <= 1.0:
            raise ValueError(f"temporal coherence {self.temporal_coherence} outside [0, 1]")


def temporal_coherence(phase_obs, model_phase) -> np.ndarray:
    """|mean over pairs of exp(i (obs - model))| for each pixel (columns)."""
    obs = np.asarray(phase_obs, dtype=float)
    model = np.asarray(model_phase, dtype=float)
    if obs.shape != model.shape:
        raise DimensionMismatch(f"observed {obs.shape} vs model {model.shape}")
    if obs.shape[0] == 0:
        return np.zeros(obs.shape[1:])
    coh = np.abs(np.exp(1j * (obs - model)).mean(axis=0))
    return np.clip(coh, 0.0, 1.0)


def select_elite(quality, threshold=0.7):
    """Pixel ids with coherence >= threshold, in input order."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return [q.pixel_id for q in quality if q.temporal_coherence >= threshold]


def neighbour_filter(coords, sigma_px=3.0, cutoff=3.0):
    """Row-normalised Gaussian neighbour weights with a zero diagonal."""
    coords = np.asarray(coords, dtype=float)
    tree = cKDTree(coords)
    d = tree.sparse_distance_matrix(tree, cutoff * sigma_px, output_type="coo_matrix")
    off = d.row != d.col
    w = np.exp(-0.5 * (d.data[off] / sigma_px) ** 2)
    n = len(coords)
    W = sparse.coo_matrix((w, (d.row[off], d.col[off])), shape=(n, n)).tocsr()
    rows = np.asarray(W.sum(axis=1)).ravel()
    rows[rows == 0] = 1.0
    return (sparse.diags(1.0 / rows) @ W).tocsr()


def model_phase(phase, coords, pair_years, radar=RadarConstants(), sigma_px=3.0,
                v_max_mm_yr=60.0, v_step_mm_yr=0.5):
    """Low-pass plus linear-rate model phase (pairs x pixels) for a wrapped stack."""
    phase = np.asarray(phase, dtype=float)
    z = np.exp(1j * phase)
    W = neighbour_filter(coords, sigma_px)
    smooth = (W @ z.T).T
    low = np.angle(smooth)
    resid = np.exp(1j * (phase - low))
    velocities = np.arange(-v_max_mm_yr, v_max_mm_yr + 0.5 * v_step_mm_yr, v_step_mm_yr)
    per_unit = displacement_to_phase(0.1, radar)  # rad per (mm/yr x yr)
    dt = np.asarray(pair_years, dtype=float)
    E = np.exp(-1j * per_unit * np.outer(velocities, dt))
    best = np.argmax(np.abs(E @ resid), axis=0)
    rate_phase = per_unit * np.outer(dt, velocities[best])
    return low + rate_phase


def assess_stack(stack, threshold=0.7, sigma_px=3.0):
    """Per-pixel :class:`PixelQuality` for a wrapped stack."""
    years = stack.catalog.decimal_years()
    pairs = stack.pairs.as_array()
    dt = years[pairs[:, 1]] - years[pairs[:, 0]]
    model = model_phase(stack.phase, stack.pixels.coords, dt, sigma_px=sigma_px)
    coh = temporal_coherence(stack.phase, model)
    return [PixelQuality(k, float(c), bool(c >= threshold)) for k, c in enumerate(coh)]
