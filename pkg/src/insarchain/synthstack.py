"""Synthetic sparse-pixel interferogram stacks with known ground truth.

Every epoch phase is the sum of deformation, a topography-correlated delay,
a bilinear orbital ramp and a DEM-error term proportional to the
perpendicular baseline. Pair phases are epoch differences plus white noise,
optionally wrapped. Random streams come from ``numpy.random.PCG64`` seeded
through ``SeedSequence`` so they are identical on every platform.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, FormatError
from .geomodel import RadarConstants, ViewGeometry, displacement_to_phase, project_vertical_to_los
from .pairnet import AcquisitionCatalog, PairSet

STACK_FORMAT = "insarchain-stack"
STACK_VERSION = 1
M_PER_DEG_LAT = 111320.0


def wrap(phi):
    """Principal value in [-pi, pi)."""
    phi = np.asarray(phi, dtype=float)
    out = phi - 2.0 * np.pi * np.floor((phi + np.pi) / (2.0 * np.pi))
    # rounding can land exactly on +pi
    out = np.where(out >= np.pi, out - 2.0 * np.pi, out)
    return out if out.ndim else float(out)


@dataclass
class PixelTable:
    x: np.ndarray
    y: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    elevation_m: np.ndarray
    incidence_deg: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=float))
        n = len(self.x)
        if any(len(getattr(self, f.name)) != n for f in fields(self)):
            raise DimensionMismatch("pixel table columns differ in length")

    def __len__(self):
        return len(self.x)

    @property
    def coords(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def take(self, idx):
        return PixelTable(*(getattr(self, f.name)[idx] for f in fields(self)))


@dataclass
class InterferogramStack:
    catalog: AcquisitionCatalog
    pairs: PairSet
    pixels: PixelTable
    phase: np.ndarray          # (n_pairs, n_pixels) radians
    wrapped: bool
    weights: np.ndarray        # (n_pairs, n_pixels) in (0, 1]
    elite: np.ndarray | None = None

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        shape = (len(self.pairs), len(self.pixels))
        if self.phase.shape != shape or self.weights.shape != shape:
            raise DimensionMismatch(
                f"phase {self.phase.shape} / weights {self.weights.shape} do not match {shape}"
            )
        if np.any(self.weights <= 0) or np.any(self.weights > 1):
            raise ValueError("weights must lie in (0, 1]")

    @property
    def n_pixels(self):
        return len(self.pixels)

    def take_pixels(self, idx):
        elite = None if self.elite is None else self.elite[idx]
        return replace(self, pixels=self.pixels.take(idx), phase=self.phase[:, idx],
                       weights=self.weights[:, idx], elite=elite)

    def take_pairs(self, keep):
        keep = np.asarray(keep, dtype=np.int64)
        return replace(self, pairs=self.pairs.subset(keep.tolist()),
                       phase=self.phase[keep], weights=self.weights[keep])


@dataclass
class SceneTruth:
    pixels: PixelTable
    velocity_mm_yr: np.ndarray          # LOS, positive toward the sensor
    seasonal_amp_mm: np.ndarray
    atmo_coeff: np.ndarray              # per epoch, rad/m
    ramp_coeffs: np.ndarray             # per epoch (a0 rad, a1 rad/px, a2 rad/px)
    dem_error_m: np.ndarray
    decorrelated: np.ndarray            # pixels whose phase is pure noise
    noise_sigma_rad: float = 0.0
    pair_decorrelation_fraction: float = 0.0
    seed: int = 0
    geometry: ViewGeometry = field(default_factory=ViewGeometry)
    radar: RadarConstants = field(default_factory=RadarConstants)
    slant_range_m: float = 850000.0

    def __post_init__(self):
        if self.noise_sigma_rad < 0:
            raise ValueError("noise_sigma_rad must be >= 0")
        xy = np.round(self.pixels.coords, 9)
        if len(np.unique(xy, axis=0)) != len(xy):
            raise ValueError("pixel coordinates must be unique")

    def displacement_mm(self, years) -> np.ndarray:
        """True LOS displacement (epochs x pixels) in mm, zero at t = 0."""
        t = np.asarray(years, dtype=float)[:, None]
        return self.velocity_mm_yr[None, :] * t + self.seasonal_amp_mm[None, :] * np.sin(2 * np.pi * t)

    def dem_phase_per_m(self) -> float:
        """Phase per (metre of baseline x metre of height error)."""
        inc = math.radians(self.geometry.incidence_deg)
        return 4.0 * math.pi / (self.radar.wavelength_m * self.slant_range_m * math.sin(inc))


def epoch_phases(truth: SceneTruth, catalog: AcquisitionCatalog) -> np.ndarray:
    """Noise-free epoch phase (epochs x pixels), before differencing and wrapping."""
    n = len(catalog)
    n_pix = len(truth.pixels)
    if any(len(a) != n_pix for a in (truth.velocity_mm_yr, truth.seasonal_amp_mm, truth.dem_error_m,
                                     truth.decorrelated)):
        raise DimensionMismatch("per-pixel truth arrays do not match the pixel table")
    if len(truth.atmo_coeff) != n or truth.ramp_coeffs.shape != (n, 3):
        raise DimensionMismatch(
            f"per-epoch truth has {len(truth.atmo_coeff)} atmosphere / {len(truth.ramp_coeffs)} ramp "
            f"entries for {n} acquisitions"
        )
    px = truth.pixels
    years = catalog.decimal_years()
    phase = displacement_to_phase(truth.displacement_mm(years) / 10.0, truth.radar)
    phase = phase + truth.atmo_coeff[:, None] * px.elevation_m[None, :]
    a = truth.ramp_coeffs
    phase = phase + a[:, :1] + a[:, 1:2] * px.x[None, :] + a[:, 2:3] * px.y[None, :]
    bperp = catalog.perp_baselines
    phase = phase + truth.dem_phase_per_m() * bperp[:, None] * truth.dem_error_m[None, :]
    return phase


def generate_stack(truth: SceneTruth, catalog: AcquisitionCatalog, ps: PairSet, wrapped=True):
    """Build the interferogram stack; returns (stack, epoch_phase)."""
    pairs = ps.as_array()
    if len(pairs) and pairs.max() >= len(catalog):
        raise DimensionMismatch("pair index outside the catalog")
    ep = epoch_phases(truth, catalog)
    n_pix = len(truth.pixels)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(truth.seed).spawn(3)[2]))
    if len(pairs):
        phase = ep[pairs[:, 1]] - ep[pairs[:, 0]]
    else:
        phase = np.zeros((0, n_pix))
    noise = rng.standard_normal(phase.shape)
    if truth.noise_sigma_rad > 0:
        phase = phase + truth.noise_sigma_rad * noise
    weights = np.ones_like(phase)
    junk = rng.uniform(-np.pi, np.pi, size=phase.shape)
    mask = np.zeros(phase.shape, dtype=bool)
    mask[:, truth.decorrelated] = True
    if truth.pair_decorrelation_fraction > 0:
        mask |= rng.random(phase.shape) < truth.pair_decorrelation_fraction
        weights[mask & ~truth.decorrelated[None, :]] = 0.1
    phase = np.where(mask, junk, phase)
    if wrapped:
        phase = wrap(phase)
    stack = InterferogramStack(catalog, ps, truth.pixels, phase, bool(wrapped), weights)
    return stack, ep


# -- default scene -----------------------------------------------------------

@dataclass
class SceneParams:
    """Parameters of a synthetic scene; every field may be set from the scene config."""

    grid_size: int = 100
    pixel_spacing_m: float = 25.0
    origin_lon: float = -73.95
    origin_lat: float = 40.70
    n_pixels: int = 3600
    decorrelated_fraction: float = 0.16
    n_epochs: int = 30
    start_date: str = "2015-03-12"
    cadence_days: int = 24
    perp_baseline_sigma_m: float = 40.0
    subsidence_peak_mm_yr: float = -25.7
    subsidence_center: tuple = (50.0, 50.0)
    subsidence_sigma_px: float = 7.0
    uplift_peak_mm_yr: float = 8.7
    uplift_center: tuple = (78.0, 25.0)
    uplift_sigma_px: float = 4.0
    gia_vertical_mm_yr: float = -1.5
    seasonal_amp_mm: float = 0.0
    base_elevation_m: float = 5.0
    hills: tuple = ((20.0, 80.0, 12.0, 120.0), (85.0, 72.0, 9.0, 80.0))
    atmo_sigma_rad_per_m: float = 0.004
    ramp_sigma: tuple = (1.0, 0.01, 0.01)
    dem_error_sigma_m: float = 2.0
    noise_sigma_rad: float = 0.5
    pair_decorrelation_fraction: float = 0.0
    incidence_deg: float = 38.9
    heading_deg: float = 347.0
    wavelength_m: float = 0.0554658
    slant_range_m: float = 850000.0
    station_id: str = "SYN1"
    station_pixel: tuple = (12.0, 12.0)
    station_sigma_mm_yr: float = 0.3

    def __post_init__(self):
        for name in ("subsidence_center", "uplift_center", "ramp_sigma", "station_pixel"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))
        self.hills = tuple(tuple(float(v) for v in h) for h in self.hills)
        if self.grid_size < 2 or self.n_pixels < 3:
            raise ValueError("scene needs grid_size >= 2 and n_pixels >= 3")
        if self.n_pixels > self.grid_size ** 2:
            raise ValueError("n_pixels exceeds the number of grid cells")
        if not 0 <= self.decorrelated_fraction < 1:
            raise ValueError("decorrelated_fraction must be in [0, 1)")
        if self.n_epochs < 2 or self.cadence_days < 1:
            raise ValueError("scene needs n_epochs >= 2 and cadence_days >= 1")
        if self.noise_sigma_rad < 0:
            raise ValueError("noise_sigma_rad must be >= 0")
        if any(len(h) != 4 for h in self.hills):
            raise ValueError("each hill is (x, y, sigma_px, height_m)")


def null_scene_params(**overrides) -> SceneParams:
    """A scene with no deformation, nuisance terms or noise."""
    base = dict(subsidence_peak_mm_yr=0.0, uplift_peak_mm_yr=0.0, gia_vertical_mm_yr=0.0,
                atmo_sigma_rad_per_m=0.0, ramp_sigma=(0.0, 0.0, 0.0), dem_error_sigma_m=0.0,
                noise_sigma_rad=0.0, decorrelated_fraction=0.0)
    base.update(overrides)
    return SceneParams(**base)


def pixel_lonlat(p: SceneParams, x, y):
    lat = p.origin_lat + np.asarray(y) * p.pixel_spacing_m / M_PER_DEG_LAT
    m_per_deg_lon = M_PER_DEG_LAT * math.cos(math.radians(p.origin_lat))
    lon = p.origin_lon + np.asarray(x) * p.pixel_spacing_m / m_per_deg_lon
    return lon, lat


def build_catalog(p: SceneParams, seed: int) -> AcquisitionCatalog:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(3)[0]))
    start = dt.date.fromisoformat(p.start_date)
    dates = [start + dt.timedelta(days=k * p.cadence_days) for k in range(p.n_epochs)]
    bperp = p.perp_baseline_sigma_m * rng.standard_normal(p.n_epochs)
    bperp -= bperp[0]
    return AcquisitionCatalog.from_arrays(dates, np.round(bperp, 3))


def _gauss(x, y, cx, cy, sigma):
    return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * sigma ** 2))


def build_scene(p: SceneParams, seed: int, catalog: AcquisitionCatalog | None = None):
    """Materialise (truth, catalog) for a parameter set and seed.

    A supplied ``catalog`` replaces the simulated acquisition dates and baselines.
    """
    if catalog is None:
        catalog = build_catalog(p, seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(3)[1]))
    g = p.grid_size
    forced = {(int(round(c[0])), int(round(c[1])))
              for c in (p.subsidence_center, p.uplift_center, p.station_pixel)}
    forced = [c for c in sorted(forced) if 0 <= c[0] < g and 0 <= c[1] < g]
    forced_flat = [cx * g + cy for cx, cy in forced]
    pool = np.setdiff1d(np.arange(g * g), forced_flat)
    extra = rng.choice(pool, size=p.n_pixels - len(forced_flat), replace=False)
    flat = np.sort(np.concatenate([forced_flat, extra]).astype(np.int64))
    x = (flat // g).astype(float)
    y = (flat % g).astype(float)

    candidates = np.flatnonzero(~np.isin(flat, forced_flat))
    n_bad = int(round(p.decorrelated_fraction * len(flat)))
    decorrelated = np.zeros(len(flat), dtype=bool)
    decorrelated[np.sort(rng.choice(candidates, size=min(n_bad, len(candidates)), replace=False))] = True

    elevation = np.full(len(flat), p.base_elevation_m)
    for hx, hy, hs, hh in p.hills:
        elevation += hh * _gauss(x, y, hx, hy, hs)

    geom = ViewGeometry(p.incidence_deg, p.heading_deg)
    gia_los = project_vertical_to_los(p.gia_vertical_mm_yr, geom)
    velocity = np.full(len(flat), gia_los)
    if p.subsidence_peak_mm_yr:
        velocity += (p.subsidence_peak_mm_yr - gia_los) * _gauss(x, y, *p.subsidence_center, p.subsidence_sigma_px)
    if p.uplift_peak_mm_yr:
        velocity += (p.uplift_peak_mm_yr - gia_los) * _gauss(x, y, *p.uplift_center, p.uplift_sigma_px)
    seasonal = np.full(len(flat), p.seasonal_amp_mm)

    n = len(catalog)
    atmo = p.atmo_sigma_rad_per_m * rng.standard_normal(n)
    ramps = rng.standard_normal((n, 3)) * np.asarray(p.ramp_sigma)
    dem_err = p.dem_error_sigma_m * rng.standard_normal(len(flat))

    lon, lat = pixel_lonlat(p, x, y)
    pixels = PixelTable(x, y, lon, lat, elevation, np.full(len(flat), p.incidence_deg))
    truth = SceneTruth(pixels, velocity, seasonal, atmo, ramps, dem_err, decorrelated,
                       noise_sigma_rad=p.noise_sigma_rad,
                       pair_decorrelation_fraction=p.pair_decorrelation_fraction, seed=seed,
                       geometry=geom, radar=RadarConstants(p.wavelength_m), slant_range_m=p.slant_range_m)
    return truth, catalog


def station_lonlat(p: SceneParams):
    lon, lat = pixel_lonlat(p, p.station_pixel[0], p.station_pixel[1])
    return float(lon), float(lat)


# -- serialization -------------------------------------------------------------

def save_stack(stack: InterferogramStack, path) -> None:
    """Write a stack as a versioned ``.npz`` archive to a path or binary file (see docs/formats.md)."""
    px = stack.pixels
    arrays = dict(
        format=np.array(STACK_FORMAT), version=np.array(STACK_VERSION),
        epoch_dates=np.array([d.isoformat() for d in stack.catalog.dates]),
        perp_baselines=stack.catalog.perp_baselines,
        pairs=stack.pairs.as_array(),
        thresholds=np.array([stack.pairs.perp_max_m, stack.pairs.temp_max_days]),
        phase=stack.phase, weights=stack.weights, wrapped=np.array(stack.wrapped),
        **{f"pixel_{f.name}": getattr(px, f.name) for f in fields(px)},
    )
    if stack.elite is not None:
        arrays["elite"] = np.asarray(stack.elite, dtype=bool)
    np.savez(path, **arrays)


def load_stack(path) -> InterferogramStack:
    try:
        z = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: not a readable stack archive ({exc})") from exc
    with z:
        if "format" not in z or str(z["format"]) != STACK_FORMAT:
            raise FormatError(f"{path}: missing '{STACK_FORMAT}' header")
        if int(z["version"]) != STACK_VERSION:
            raise FormatError(f"{path}: unsupported stack version {int(z['version'])}")
        dates = [dt.date.fromisoformat(str(s)) for s in z["epoch_dates"]]
        catalog = AcquisitionCatalog.from_arrays(dates, z["perp_baselines"])
        perp_max, temp_max = (float(v) for v in z["thresholds"])
        pairs = PairSet(tuple((int(i), int(j)) for i, j in z["pairs"]), perp_max, temp_max)
        pixels = PixelTable(*(z[f"pixel_{f.name}"] for f in fields(PixelTable)))
        elite = z["elite"] if "elite" in z else None
        return InterferogramStack(catalog, pairs, pixels, z["phase"], bool(z["wrapped"]),
                                  z["weights"], elite)


def save_truth(truth: SceneTruth, path) -> None:
    px = truth.pixels
    np.savez(
        path, format=np.array("insarchain-truth"), version=np.array(1),
        velocity_mm_yr=truth.velocity_mm_yr, seasonal_amp_mm=truth.seasonal_amp_mm,
        atmo_coeff=truth.atmo_coeff, ramp_coeffs=truth.ramp_coeffs, dem_error_m=truth.dem_error_m,
        decorrelated=truth.decorrelated, noise_sigma_rad=np.array(truth.noise_sigma_rad),
        seed=np.array(truth.seed),
        **{f"pixel_{f.name}": getattr(px, f.name) for f in fields(px)},
    )


def load_truth_velocity(path):
    """(pixel table, LOS velocity mm/yr) from a truth archive written by :func:`save_truth`."""
    with np.load(Path(path), allow_pickle=False) as z:
        pixels = PixelTable(*(z[f"pixel_{f.name}"] for f in fields(PixelTable)))
        return pixels, z["velocity_mm_yr"]
