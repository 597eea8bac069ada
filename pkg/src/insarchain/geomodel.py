"""Viewing geometry and phase/displacement unit conversions.

Sign convention throughout the package: positive LOS displacement is motion
toward the sensor, so subsidence is negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SENTINEL1_WAVELENGTH_M = 0.0554658


@dataclass(frozen=True)
class ViewGeometry:
    incidence_deg: float = 38.9
    heading_deg: float = 347.0

    def __post_init__(self):
        if not (0.0 <= self.incidence_deg < 90.0):
            raise ValueError(f"incidence_deg must be in [0, 90), got {self.incidence_deg}")
        if not (0.0 <= self.heading_deg < 360.0):
            raise ValueError(f"heading_deg must be in [0, 360), got {self.heading_deg}")


@dataclass(frozen=True)
class RadarConstants:
    wavelength_m: float = SENTINEL1_WAVELENGTH_M

    def __post_init__(self):
        if not (self.wavelength_m > 0 and math.isfinite(self.wavelength_m)):
            raise ValueError(f"wavelength_m must be positive, got {self.wavelength_m}")


def los_unit_vector(geom: ViewGeometry) -> np.ndarray:
    """Unit (east, north, up) vector pointing from the ground pixel to the sensor.

    The radar is right-looking, so the horizontal look direction has azimuth
    ``heading + 90``; the ground-to-sensor vector points the opposite way,
    azimuth ``heading - 90``, which gives east = -sin(inc) cos(heading) and
    north = sin(inc) sin(heading).
    """
    inc = math.radians(geom.incidence_deg)
    head = math.radians(geom.heading_deg)
    s = math.sin(inc)
    return np.array([-s * math.cos(head), s * math.sin(head), math.cos(inc)])


def project_vertical_to_los(v_up, geom: ViewGeometry):
    """Project a vertical rate onto the line of sight (same units in and out)."""
    return v_up * math.cos(math.radians(geom.incidence_deg))


def phase_to_displacement(phi, c: RadarConstants = RadarConstants()):
    """Convert interferometric phase (rad) to LOS displacement in cm."""
    return -phi * c.wavelength_m / (4.0 * math.pi) * 100.0


def displacement_to_phase(d_cm, c: RadarConstants = RadarConstants()):
    """Inverse of :func:`phase_to_displacement`."""
    return -d_cm / 100.0 * (4.0 * math.pi) / c.wavelength_m
