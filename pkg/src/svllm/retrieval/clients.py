"""Provider clients: reverse geocoding, nearby places, street view.

Request construction is split into pure functions so the synthetic-city
generator can materialize replay fixtures for exactly the requests these
clients will make.
"""

from __future__ import annotations

import datetime as _dt
import logging
import os
import random
from concurrent.futures import ThreadPoolExecutor

from ..errors import ProviderError
from ..geo import GeoPoint, destination_point, haversine_distance
from .cache import ResponseCache
from .transport import CanonicalRequest, Transport
from .types import (Address, GeoContext, ImageRef, ImageStatus, NearbyPlace,
                    RetrievalConfig)

logger = logging.getLogger(__name__)


# --- request builders ---------------------------------------------------

def reverse_geocode_request(point: GeoPoint, cfg: RetrievalConfig) -> CanonicalRequest:
    url = (f"{cfg.nominatim_url}/reverse?format=jsonv2"
           f"&lat={point.lat:.6f}&lon={point.lon:.6f}")
    return CanonicalRequest("GET", url, provider="geocode")


def nearby_places_request(point: GeoPoint, cfg: RetrievalConfig) -> CanonicalRequest:
    limit = cfg.places_limit * cfg.places_oversample
    query = (f'[out:json];node(around:{int(cfg.places_radius_m)},'
             f'{point.lat:.6f},{point.lon:.6f})["name"];out body {limit};')
    return CanonicalRequest("POST", cfg.overpass_url, body=query, provider="places")


def poi_request(point: GeoPoint, cfg: RetrievalConfig) -> CanonicalRequest:
    query = (f"[out:json];node(around:{int(cfg.poi_radius_m)},"
             f"{point.lat:.6f},{point.lon:.6f});out body {cfg.poi_limit};")
    return CanonicalRequest("POST", cfg.overpass_url, body=query, provider="places")


def svi_metadata_request(probe: GeoPoint, cfg: RetrievalConfig) -> CanonicalRequest:
    url = (f"{cfg.streetview_url}/metadata?location={probe.lat:.6f},{probe.lon:.6f}"
           f"&radius={int(cfg.svi_radius_m)}&key=REDACTED")
    return CanonicalRequest(
        "GET", url, provider="imagery",
        secret_params=(("key", os.environ.get(cfg.streetview_key_env, "")),))


def svi_image_request(probe: GeoPoint, cfg: RetrievalConfig) -> CanonicalRequest:
    url = (f"{cfg.streetview_url}?size={cfg.svi_image_size}"
           f"&location={probe.lat:.6f},{probe.lon:.6f}"
           f"&radius={int(cfg.svi_radius_m)}&heading={cfg.svi_heading:g}&key=REDACTED")
    return CanonicalRequest(
        "GET", url, provider="imagery",
        secret_params=(("key", os.environ.get(cfg.streetview_key_env, "")),))


def probe_points(point: GeoPoint, cfg: RetrievalConfig) -> list[GeoPoint]:
    """Deterministic jitter probes inside the street-view buffer.

    Probes sit at uniform bearings on two rings (half radius, full
    radius); the bearing origin is seeded by the sample id so distinct
    samples do not share probe geometry.
    """
    n = cfg.resample_probes
    if n == 0:
        return []
    base = random.Random(f"{point.id}:svi-probes").uniform(0.0, 360.0)
    inner_count = n // 2
    rings = [(cfg.svi_radius_m / 2.0, inner_count), (cfg.svi_radius_m, n - inner_count)]
    probes = []
    k = 0
    for radius, count in rings:
        for j in range(count):
            bearing = (base + 360.0 * j / count) % 360.0
            probes.append(destination_point(point, bearing, radius,
                                            id=f"{point.id}:probe{k}"))
            k += 1
    return probes


# --- response parsing ---------------------------------------------------

def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_address(payload: dict, provider: str = "nominatim",
                  retrieved_at: str | None = None) -> Address:
    display = payload.get("display_name") or ""
    if not display:
        raise ProviderError("reverse geocode response missing display_name")
    comps = payload.get("address") or {}
    return Address(display_name=display,
                   components=tuple((k, str(v)) for k, v in comps.items()),
                   provider=provider,
                   retrieved_at=retrieved_at or _utc_now())


_CATEGORY_TAG_KEYS = ("amenity", "shop", "leisure", "tourism", "landuse",
                      "building", "natural", "office", "man_made", "highway")


def _element_category(tags: dict) -> str | None:
    for key in _CATEGORY_TAG_KEYS:
        if key in tags:
            return f"{key}={tags[key]}"
    return None


def parse_places(payload: dict, point: GeoPoint, cfg: RetrievalConfig) -> list[NearbyPlace]:
    places = []
    for el in payload.get("elements", []):
        tags = el.get("tags") or {}
        name = tags.get("name")
        if not name or "lat" not in el or "lon" not in el:
            continue
        loc = GeoPoint(lat=el["lat"], lon=el["lon"], id=f"osm-{el.get('id', '')}")
        dist = haversine_distance(point, loc)
        if dist > cfg.places_radius_m:
            continue
        places.append(NearbyPlace(name=name, location=loc, distance_m=dist,
                                  category=_element_category(tags)))
    places.sort(key=lambda p: (p.distance_m, p.name, p.location.id))
    return places[:cfg.places_limit]


# --- retriever ----------------------------------------------------------

class Retriever:
    """Cached, rate-limited access to the three geographic providers."""

    def __init__(self, cfg: RetrievalConfig, transport: Transport | None = None):
        self.cfg = cfg
        self.transport = transport if transport is not None else Transport(cfg)
        self.cache = ResponseCache(cfg.cache_dir)

    # - reverse geocoding -

    def reverse_geocode(self, point: GeoPoint) -> Address:
        cached = self.cache.get("geocode", point, {})
        if cached is not None:
            return Address.from_dict(cached)
        resp = self.transport.request(reverse_geocode_request(point, self.cfg))
        if resp.status != 200:
            raise ProviderError(f"reverse geocode HTTP {resp.status} for {point.id}")
        address = parse_address(resp.json())
        self.cache.put("geocode", point, {}, address.as_dict())
        return address

    # - nearby places -

    def nearby_places(self, point: GeoPoint) -> list[NearbyPlace]:
        params = {"radius": self.cfg.places_radius_m, "limit": self.cfg.places_limit}
        cached = self.cache.get("places", point, params)
        if cached is not None:
            return [NearbyPlace.from_dict(p) for p in cached["places"]]
        resp = self.transport.request(nearby_places_request(point, self.cfg))
        if resp.status != 200:
            raise ProviderError(f"places HTTP {resp.status} for {point.id}")
        places = parse_places(resp.json(), point, self.cfg)
        self.cache.put("places", point, params, {"places": [p.as_dict() for p in places]})
        return places

    # - street view -

    def fetch_street_view(self, point: GeoPoint) -> ImageRef:
        params = {"radius": self.cfg.svi_radius_m, "size": self.cfg.svi_image_size,
                  "heading": self.cfg.svi_heading}
        cached = self.cache.get("svi", point, params)
        if cached is not None:
            return ImageRef.from_dict(cached)
        image = self._fetch_street_view_uncached(point)
        self.cache.put("svi", point, params, image.as_dict())
        return image

    def _fetch_street_view_uncached(self, point: GeoPoint) -> ImageRef:
        for probe in [point] + probe_points(point, self.cfg):
            meta_resp = self.transport.request(svi_metadata_request(probe, self.cfg))
            if meta_resp.status != 200:
                raise ProviderError(f"street view metadata HTTP {meta_resp.status}")
            meta = meta_resp.json()
            status = meta.get("status", "")
            if status == "ZERO_RESULTS":
                continue
            if status != "OK":
                raise ProviderError(f"street view metadata status {status!r}")
            loc = meta.get("location") or {}
            if "lat" in loc and "lng" in loc:
                capture = GeoPoint(lat=loc["lat"], lon=loc["lng"], id=point.id)
            else:
                capture = GeoPoint(lat=probe.lat, lon=probe.lon, id=point.id)
            offset = haversine_distance(point, capture)
            if offset > self.cfg.svi_radius_m + 1e-6:
                # Pano exists but sits outside the sample's buffer.
                continue
            img_resp = self.transport.request(svi_image_request(probe, self.cfg))
            if img_resp.status != 200:
                raise ProviderError(f"street view image HTTP {img_resp.status}")
            rel_path, digest = self.cache.put_image(img_resp.body)
            return ImageRef(status=ImageStatus.AVAILABLE, local_path=rel_path,
                            capture_point=capture, offset_m=offset,
                            heading=self.cfg.svi_heading, content_hash=digest,
                            max_offset_m=self.cfg.svi_radius_m)
        return ImageRef(status=ImageStatus.MISSING)

    # - composition -

    def build_geo_context(self, point: GeoPoint) -> GeoContext:
        """Assemble the full retrieval bundle for one sample point.

        Address or places failures abort with ProviderError; imagery that
        is definitively absent is representable as ImageRef.MISSING.
        """
        address = self.reverse_geocode(point)
        nearby = self.nearby_places(point)
        image = self.fetch_street_view(point)
        return GeoContext(point=point, address=address, nearby=tuple(nearby), image=image)

    def build_many(self, points: list[GeoPoint]) -> list[GeoContext]:
        """Fetch contexts for distinct points concurrently (bounded workers)."""
        workers = max(1, self.cfg.workers)
        if workers == 1 or len(points) <= 1:
            return [self.build_geo_context(p) for p in points]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.build_geo_context, points))

    # - raw POI elements (used by the bias analysis) -

    def poi_elements(self, point: GeoPoint) -> list[dict]:
        """Tagged nodes within poi_radius_m of the point, radius-checked."""
        params = {"radius": self.cfg.poi_radius_m}
        cached = self.cache.get("poi", point, params)
        if cached is None:
            resp = self.transport.request(poi_request(point, self.cfg))
            if resp.status != 200:
                raise ProviderError(f"poi HTTP {resp.status} for {point.id}")
            cached = {"elements": resp.json().get("elements", [])}
            self.cache.put("poi", point, params, cached)
        kept = []
        for el in cached["elements"]:
            if "lat" not in el or "lon" not in el:
                continue
            loc = GeoPoint(lat=el["lat"], lon=el["lon"], id="")
            if haversine_distance(point, loc) <= self.cfg.poi_radius_m:
                kept.append(el)
        return kept
