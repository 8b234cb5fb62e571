"""Value types carried through the geographic retrieval layer."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from ..errors import ConfigError
from ..geo import GeoPoint


class Mode(str, Enum):
    LIVE = "live"
    REPLAY = "replay"
    RECORD = "record"


class ImageStatus(str, Enum):
    AVAILABLE = "available"
    MISSING = "missing"


@dataclass(frozen=True)
class Address:
    display_name: str
    components: tuple[tuple[str, str], ...]  # ordered (key, value) pairs
    provider: str
    retrieved_at: str                        # UTC ISO-8601

    def as_dict(self) -> dict:
        return {"display_name": self.display_name,
                "components": [list(kv) for kv in self.components],
                "provider": self.provider, "retrieved_at": self.retrieved_at}

    @classmethod
    def from_dict(cls, d: dict) -> "Address":
        return cls(display_name=d["display_name"],
                   components=tuple((k, v) for k, v in d.get("components", [])),
                   provider=d.get("provider", ""), retrieved_at=d.get("retrieved_at", ""))


@dataclass(frozen=True)
class NearbyPlace:
    name: str
    location: GeoPoint
    distance_m: float
    category: str | None = None

    def __post_init__(self):
        if self.distance_m < 0:
            raise ValueError("negative distance")

    def as_dict(self) -> dict:
        return {"name": self.name, "location": self.location.as_dict(),
                "distance_m": self.distance_m, "category": self.category}

    @classmethod
    def from_dict(cls, d: dict) -> "NearbyPlace":
        return cls(name=d["name"], location=GeoPoint.from_dict(d["location"]),
                   distance_m=d["distance_m"], category=d.get("category"))


# Probe construction is exact-spherical, so a ring-radius probe can
# haversine back a hair over the nominal radius; this absorbs it.
OFFSET_TOLERANCE_M = 1e-6


@dataclass(frozen=True)
class ImageRef:
    status: ImageStatus
    local_path: str | None = None       # relative to the cache dir
    capture_point: GeoPoint | None = None
    offset_m: float | None = None
    heading: float | None = None
    content_hash: str | None = None
    max_offset_m: float | None = None   # the radius this fetch honoured

    def __post_init__(self):
        if self.status is ImageStatus.MISSING:
            if self.local_path is not None or self.content_hash is not None:
                raise ValueError("missing image cannot carry a path or hash")
        else:
            if self.local_path is None or self.content_hash is None:
                raise ValueError("available image needs a path and hash")
            if self.offset_m is None or (
                    self.max_offset_m is not None
                    and self.offset_m > self.max_offset_m + OFFSET_TOLERANCE_M):
                raise ValueError(f"offset {self.offset_m} outside radius "
                                 f"{self.max_offset_m}")

    @property
    def available(self) -> bool:
        return self.status is ImageStatus.AVAILABLE

    def as_dict(self) -> dict:
        return {"status": self.status.value, "local_path": self.local_path,
                "capture_point": self.capture_point.as_dict() if self.capture_point else None,
                "offset_m": self.offset_m, "heading": self.heading,
                "content_hash": self.content_hash, "max_offset_m": self.max_offset_m}

    @classmethod
    def from_dict(cls, d: dict) -> "ImageRef":
        cap = d.get("capture_point")
        return cls(status=ImageStatus(d["status"]), local_path=d.get("local_path"),
                   capture_point=GeoPoint.from_dict(cap) if cap else None,
                   offset_m=d.get("offset_m"), heading=d.get("heading"),
                   content_hash=d.get("content_hash"), max_offset_m=d.get("max_offset_m"))


@dataclass(frozen=True)
class GeoContext:
    point: GeoPoint
    address: Address
    nearby: tuple[NearbyPlace, ...]
    image: ImageRef

    def __post_init__(self):
        if len(self.nearby) > 10:
            raise ValueError("nearby list longer than 10")

    def as_dict(self) -> dict:
        return {"point": self.point.as_dict(), "address": self.address.as_dict(),
                "nearby": [p.as_dict() for p in self.nearby],
                "image": self.image.as_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoContext":
        return cls(point=GeoPoint.from_dict(d["point"]),
                   address=Address.from_dict(d["address"]),
                   nearby=tuple(NearbyPlace.from_dict(p) for p in d.get("nearby", [])),
                   image=ImageRef.from_dict(d["image"]))


@dataclass
class RetrievalConfig:
    cache_dir: Path
    mode: Mode = Mode.REPLAY
    places_radius_m: float = 100_000.0
    places_limit: int = 10
    places_oversample: int = 5          # fetch limit*oversample, keep nearest limit
    svi_radius_m: float = 40.0
    resample_probes: int = 8
    svi_image_size: str = "640x640"
    svi_heading: float = 0.0
    poi_radius_m: float = 500.0
    poi_limit: int = 500
    nominatim_url: str = "https://nominatim.openstreetmap.org"
    overpass_url: str = "https://overpass-api.de/api/interpreter"
    streetview_url: str = "https://maps.googleapis.com/maps/api/streetview"
    streetview_key_env: str = "STREETVIEW_API_KEY"
    # requests per second, enforced globally across worker threads
    rate_limits: dict = None
    max_retries: int = 3
    retry_base_s: float = 0.5
    timeout_s: float = 30.0
    workers: int = 4
    keep_missing_images: bool = False

    def __post_init__(self):
        self.cache_dir = Path(self.cache_dir)
        if self.rate_limits is None:
            self.rate_limits = {"geocode": 1.0, "places": 2.0, "imagery": 10.0}
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode)
        if self.resample_probes < 0:
            raise ConfigError("resample_probes must be >= 0")
        for name in ("places_radius_m", "svi_radius_m", "poi_radius_m"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
