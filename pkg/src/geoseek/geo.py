"""Coordinates, great-circle distance, GeoScore, and km-threshold bands.

All distance math runs on the mean-radius sphere (r = 6371 km) in double
precision. Haversine is accurate to well under the 1e-6 km tolerance the
test goldens use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

EARTH_RADIUS_KM = 6371.0

# Largest possible great-circle separation (antipodal points).
MAX_DISTANCE_KM = math.pi * EARTH_RADIUS_KM

# Kilometers, always non-negative and bounded by MAX_DISTANCE_KM.
DistanceKm = float


def _wrap_lon(lon: float) -> float:
    if -180.0 <= lon <= 180.0:
        return lon
    wrapped = math.fmod(lon + 180.0, 360.0)
    if wrapped < 0.0:
        wrapped += 360.0
    return wrapped - 180.0


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in degrees.

    Longitude is wrapped into [-180, 180] on construction. Latitude outside
    [-90, 90] is rejected rather than wrapped (wrapping latitude is
    geometrically ambiguous), as is any non-finite coordinate.
    """

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range [-90, 90]: {self.lat}")
        object.__setattr__(self, "lon", _wrap_lon(self.lon))


class Band(str, Enum):
    """Distance granularity band. Bands are nested: a distance inside the
    City threshold also counts toward Region, Country, and Continent."""

    CITY = "City"
    REGION = "Region"
    COUNTRY = "Country"
    CONTINENT = "Continent"
    MISS = "Miss"


BAND_THRESHOLDS_KM: dict[Band, float] = {
    Band.CITY: 25.0,
    Band.REGION: 200.0,
    Band.COUNTRY: 750.0,
    Band.CONTINENT: 2500.0,
}

# Threshold order used for nesting and reports.
BAND_ORDER = (Band.CITY, Band.REGION, Band.COUNTRY, Band.CONTINENT)


def haversine_distance(a: GeoPoint, b: GeoPoint) -> DistanceKm:
    """Great-circle distance between two points, in kilometers.

    The radicand is clamped to [0, 1] before the arcsine so near-antipodal
    floating-point overshoot cannot raise a domain error.
    """
    phi_a = math.radians(a.lat)
    phi_b = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    radicand = (
        math.sin(dphi / 2.0) ** 2
        + math.cos(phi_a) * math.cos(phi_b) * math.sin(dlam / 2.0) ** 2
    )
    radicand = min(max(radicand, 0.0), 1.0)
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(radicand))


def geoscore(d: DistanceKm, d_max: float = 18050.0) -> float:
    """Community geolocation score: 5000 * exp(-10 d / d_max), in [0, 5000].

    5000 means an exact hit; the score decays exponentially with distance.
    The default scale of 18,050 km is the customary global setting.
    """
    if d_max <= 0.0:
        raise ValueError(f"d_max must be positive, got {d_max}")
    if d < 0.0:
        raise ValueError(f"distance must be non-negative, got {d}")
    return 5000.0 * math.exp(-10.0 * d / d_max)


def classify_band(d: DistanceKm) -> Band:
    """Narrowest band containing the distance; boundaries are inclusive
    (exactly 25 km still counts as City)."""
    if d < 0.0:
        raise ValueError(f"distance must be non-negative, got {d}")
    for band in BAND_ORDER:
        if d <= BAND_THRESHOLDS_KM[band]:
            return band
    return Band.MISS


def within_band(d: DistanceKm, band: Band) -> bool:
    """Nested membership test: True when the distance falls inside the
    band's threshold (a City-accurate guess is also Region-accurate)."""
    if band is Band.MISS:
        return d > BAND_THRESHOLDS_KM[Band.CONTINENT]
    return d <= BAND_THRESHOLDS_KM[band]
