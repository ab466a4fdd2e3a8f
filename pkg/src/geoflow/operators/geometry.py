"""Great-circle geometry on a spherical Earth.

Angles are degrees at the interface and radians internally; distances are
meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0

DIRECTIONS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")


class DegenerateBearing(ValueError):
    """Bearing between coincident points is undefined."""


class TooFewPoints(ValueError):
    pass


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180]")
        if lon == 180.0:
            lon = -180.0
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)

    def to_dict(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}


def haversine(a: GeoPoint, b: GeoPoint, radius: float = EARTH_RADIUS_M) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2 * radius * math.atan2(math.sqrt(h), math.sqrt(1 - h))


def bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Initial bearing from ``a`` to ``b`` in degrees clockwise from north, in [0, 360)."""
    if a == b:
        raise DegenerateBearing(f"bearing undefined for coincident points {a}")
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    theta = math.degrees(math.atan2(y, x)) % 360.0
    # -0.0 % 360 and values within rounding of 360 both land on 360.0
    return 0.0 if theta >= 360.0 else theta


def bearing_to_direction(theta: float) -> str:
    """Map a bearing to one of eight 45-degree sectors centred on N, NE, ..."""
    theta = theta % 360.0
    return DIRECTIONS[int(((theta + 22.5) % 360.0) // 45.0)]


def pairwise_extremes(points: list[GeoPoint]) -> tuple[int, int]:
    """Index pair ``(i, j)``, ``i < j``, of the two mutually farthest points."""
    if len(points) < 2:
        raise TooFewPoints("need at least two points")
    best = (0, 1)
    best_d = -1.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = haversine(points[i], points[j])
            if d > best_d:
                best, best_d = (i, j), d
    return best


def destination(origin: GeoPoint, distance_m: float, bearing_deg: float) -> GeoPoint:
    """Point reached travelling ``distance_m`` along a great circle from ``origin``."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    phi1, lam1 = math.radians(origin.lat), math.radians(origin.lon)
    phi2 = math.asin(math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta))
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    lon = (math.degrees(lam2) + 180.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(phi2), lon)
