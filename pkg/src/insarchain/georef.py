"""Tie the relative velocity field to a GNSS station, remove GIA, summarise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import EmptyProduct, FormatError, NoPixelsNearStation, PixelOutsideGrid
from .geomodel import ViewGeometry, project_vertical_to_los

M_PER_DEG = 111320.0
GIA_HEADER = "# insarchain-gia-grid v1"


@dataclass(frozen=True)
class GnssTie:
    station_id: str
    lon: float
    lat: float
    vertical_rate_mm_yr: float
    sigma_mm_yr: float = 1.0

    def __post_init__(self):
        if not (-180 <= self.lon <= 360 and -90 <= self.lat <= 90):
            raise ValueError(f"station {self.station_id}: coordinates out of range")
        if not math.isfinite(self.vertical_rate_mm_yr) or not self.sigma_mm_yr > 0:
            raise ValueError(f"station {self.station_id}: invalid rate or sigma")


@dataclass(frozen=True)
class GiaGrid:
    lon: np.ndarray      # strictly increasing
    lat: np.ndarray      # strictly increasing
    rates: np.ndarray    # (nlat, nlon) vertical mm/yr

    def __post_init__(self):
        lon = np.asarray(self.lon, dtype=float)
        lat = np.asarray(self.lat, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        if rates.shape != (len(lat), len(lon)):
            raise FormatError(f"GIA rates shape {rates.shape} does not match ({len(lat)}, {len(lon)})")
        if len(lon) < 2 or len(lat) < 2 or np.any(np.diff(lon) <= 0) or np.any(np.diff(lat) <= 0):
            raise FormatError("GIA grid axes need >= 2 strictly increasing nodes")
        if not np.all(np.isfinite(rates)):
            raise FormatError("GIA grid contains non-finite rates")
        object.__setattr__(self, "lon", lon)
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "rates", rates)

    def sample(self, lon, lat) -> np.ndarray:
        """Bilinear vertical rate at the given points."""
        lon = np.atleast_1d(np.asarray(lon, dtype=float))
        lat = np.atleast_1d(np.asarray(lat, dtype=float))
        outside = ((lon < self.lon[0]) | (lon > self.lon[-1])
                   | (lat < self.lat[0]) | (lat > self.lat[-1]))
        if outside.any():
            k = int(np.flatnonzero(outside)[0])
            raise PixelOutsideGrid(
                f"{int(outside.sum())} pixel(s) outside the GIA grid, first at "
                f"({lon[k]:.6f}, {lat[k]:.6f})"
            )
        interp = RegularGridInterpolator((self.lat, self.lon), self.rates, method="linear")
        return interp(np.column_stack([lat, lon]))

    @classmethod
    def uniform(cls, rate, lon_range, lat_range):
        return cls(np.array(lon_range, float), np.array(lat_range, float), np.full((2, 2), float(rate)))


def local_distance_m(lon0, lat0, lon, lat):
    """Equirectangular distance in metres; adequate over a few kilometres."""
    dx = (np.asarray(lon) - lon0) * M_PER_DEG * math.cos(math.radians(lat0))
    dy = (np.asarray(lat) - lat0) * M_PER_DEG
    return np.hypot(dx, dy)


def calibration_offset(product, tie: GnssTie, geom: ViewGeometry = ViewGeometry(), radius_m=200.0):
    """Constant that makes the mean LOS rate near the station equal its projected GNSS rate."""
    d = local_distance_m(tie.lon, tie.lat, product.lon, product.lat)
    near = (d <= radius_m) & np.isfinite(product.velocity_mm_yr)
    if not near.any():
        raise NoPixelsNearStation(
            f"no valid pixels within {radius_m} m of station {tie.station_id}"
        )
    target = project_vertical_to_los(tie.vertical_rate_mm_yr, geom)
    return float(target - np.mean(product.velocity_mm_yr[near])), int(near.sum())


def calibrate_to_gnss(product, tie: GnssTie, geom: ViewGeometry = ViewGeometry(), radius_m=200.0):
    """Shift every rate (and time series) by the GNSS tie offset.

    Returns (calibrated product, offset mm/yr, number of tie pixels).
    """
    offset, n_near = calibration_offset(product, tie, geom, radius_m)
    return product.shifted(offset), offset, n_near


def subtract_gia(product, grid: GiaGrid, geom: ViewGeometry = ViewGeometry()):
    """Remove the LOS projection of the sampled GIA vertical rate from every pixel."""
    gia_los = project_vertical_to_los(grid.sample(product.lon, product.lat), geom)
    return product.shifted(-gia_los)


@dataclass(frozen=True)
class FieldStats:
    n: int
    min: float
    max: float
    median: float
    cdf_values: np.ndarray
    cdf_fractions: np.ndarray

    def as_dict(self):
        return {"n": self.n, "min_mm_yr": self.min, "max_mm_yr": self.max,
                "median_mm_yr": self.median}


def field_stats(velocity) -> FieldStats:
    """Summary of a velocity field (array or product).

    The median of an even count is the lower middle value; the CDF lists each
    distinct value with the fraction of pixels at or below it.
    """
    v = getattr(velocity, "velocity_mm_yr", velocity)
    v = np.asarray(v, dtype=float).ravel()
    v = np.sort(v[np.isfinite(v)])
    if not len(v):
        raise EmptyProduct("no finite velocities to summarise")
    med = float(v[(len(v) - 1) // 2])
    values = np.unique(v)
    frac = np.searchsorted(v, values, side="right") / len(v)
    return FieldStats(len(v), float(v[0]), float(v[-1]), med, values, frac)


def read_gnss_tie(path) -> GnssTie:
    """One data line ``station,lon,lat,vertical_rate_mm_yr,sigma_mm_yr``; ``#`` lines are comments."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    data = [ln for ln in lines if ln and not ln.startswith("#")]
    if len(data) != 1:
        raise FormatError(f"{path}: expected one station line, found {len(data)}")
    parts = [s.strip() for s in data[0].split(",")]
    if len(parts) != 5:
        raise FormatError(f"{path}: station line needs 5 fields, found {len(parts)}")
    try:
        return GnssTie(parts[0], *(float(s) for s in parts[1:]))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def gnss_tie_text(tie: GnssTie) -> str:
    return ("# station,lon,lat,vertical_rate_mm_yr,sigma_mm_yr\n"
            f"{tie.station_id},{tie.lon!r},{tie.lat!r},{tie.vertical_rate_mm_yr!r},{tie.sigma_mm_yr!r}\n")


def write_gnss_tie(tie: GnssTie, path) -> None:
    Path(path).write_text(gnss_tie_text(tie), encoding="utf-8")


def gia_grid_text(grid: GiaGrid) -> str:
    fmt = lambda a: " ".join(repr(float(v)) for v in a)  # noqa: E731
    lines = [GIA_HEADER, f"nlon {len(grid.lon)}", f"nlat {len(grid.lat)}",
             f"lon {fmt(grid.lon)}", f"lat {fmt(grid.lat)}", "rates"]
    lines += [fmt(row) for row in grid.rates]
    return "\n".join(lines) + "\n"


def write_gia_grid(grid: GiaGrid, path) -> None:
    Path(path).write_text(gia_grid_text(grid), encoding="utf-8")


def read_gia_grid(path) -> GiaGrid:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != GIA_HEADER:
        raise FormatError(f"{path}: missing '{GIA_HEADER}' header")
    try:
        head = {}
        for ln in lines[1:5]:
            key, _, rest = ln.partition(" ")
            head[key] = rest
        nlon, nlat = int(head["nlon"]), int(head["nlat"])
        lon = np.array(head["lon"].split(), dtype=float)
        lat = np.array(head["lat"].split(), dtype=float)
        if lines[5] != "rates":
            raise FormatError(f"{path}: expected 'rates' line")
        rows = [np.array(ln.split(), dtype=float) for ln in lines[6:]]
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed GIA grid ({exc})") from exc
    if len(lon) != nlon or len(lat) != nlat or len(rows) != nlat or any(len(r) != nlon for r in rows):
        raise FormatError(f"{path}: grid dimensions disagree with nlon/nlat")
    return GiaGrid(lon, lat, np.vstack(rows))
