"""Geographic primitives: points, great-circle distance, bounding boxes.

All distances are great-circle metres on a sphere of mean radius
EARTH_RADIUS_M. Longitudes are normalized to [-180, 180) at construction
so distances and boxes are unambiguous; antimeridian-spanning boxes are
rejected rather than supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyInput

EARTH_RADIUS_M = 6_371_000.0


def wrap_lon(lon: float) -> float:
    """Normalize a longitude in degrees to [-180, 180)."""
    x = (lon + 180.0) % 360.0 - 180.0
    # Python's % keeps the result in [0, 360), so x is already < 180.
    return x


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    id: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinates: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        object.__setattr__(self, "lon", wrap_lon(float(self.lon)))
        object.__setattr__(self, "lat", float(self.lat))

    def as_dict(self) -> dict:
        return {"lat": self.lat, "lon": self.lon, "id": self.id}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoPoint":
        return cls(lat=d["lat"], lon=d["lon"], id=d.get("id", ""))


@dataclass(frozen=True)
class BBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError("bounding box has min > max")

    def contains(self, p: GeoPoint) -> bool:
        return (self.min_lat <= p.lat <= self.max_lat
                and self.min_lon <= p.lon <= self.max_lon)

    def as_dict(self) -> dict:
        return {"min_lat": self.min_lat, "max_lat": self.max_lat,
                "min_lon": self.min_lon, "max_lon": self.max_lon}

    @classmethod
    def from_dict(cls, d: dict) -> "BBox":
        return cls(d["min_lat"], d["max_lat"], d["min_lon"], d["max_lon"])


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in metres.

    Symmetric, zero iff the coordinates coincide. Uses the haversine
    formulation, which is numerically stable for small separations.
    """
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def destination_point(origin: GeoPoint, bearing_deg: float, distance_m: float,
                      id: str = "") -> GeoPoint:
    """Point reached by travelling distance_m along a great circle at the
    given initial bearing (degrees clockwise from north)."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    phi1 = math.radians(origin.lat)
    lam1 = math.radians(origin.lon)
    phi2 = math.asin(math.sin(phi1) * math.cos(delta)
                     + math.cos(phi1) * math.sin(delta) * math.cos(theta))
    lam2 = lam1 + math.atan2(math.sin(theta) * math.sin(delta) * math.cos(phi1),
                             math.cos(delta) - math.sin(phi1) * math.sin(phi2))
    return GeoPoint(lat=math.degrees(phi2), lon=wrap_lon(math.degrees(lam2)), id=id)


def bounding_box(points: list[GeoPoint]) -> BBox:
    """Tight min/max envelope of a non-empty point list."""
    if not points:
        raise EmptyInput("bounding_box needs at least one point")
    lats = [p.lat for p in points]
    lons = [p.lon for p in points]
    return BBox(min(lats), max(lats), min(lons), max(lons))


_GEOHASH_BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"


def geohash(lat: float, lon: float, precision: int = 5) -> str:
    """Standard base-32 geohash of a coordinate, used for cache sharding."""
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    bits = []
    even = True
    while len(bits) < precision * 5:
        if even:
            mid = (lon_lo + lon_hi) / 2
            if lon >= mid:
                bits.append(1)
                lon_lo = mid
            else:
                bits.append(0)
                lon_hi = mid
        else:
            mid = (lat_lo + lat_hi) / 2
            if lat >= mid:
                bits.append(1)
                lat_lo = mid
            else:
                bits.append(0)
                lat_hi = mid
        even = not even
    chars = []
    for i in range(0, len(bits), 5):
        idx = 0
        for b in bits[i:i + 5]:
            idx = (idx << 1) | b
        chars.append(_GEOHASH_BASE32[idx])
    return "".join(chars)
