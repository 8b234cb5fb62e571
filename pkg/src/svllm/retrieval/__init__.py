from .types import (Address, GeoContext, ImageRef, ImageStatus, Mode,
                    NearbyPlace, RetrievalConfig)
from .transport import CanonicalRequest, FixtureStore, RateLimiter, Transport, TransportResponse
from .cache import ResponseCache
from .clients import (Retriever, nearby_places_request, parse_address, parse_places,
                      poi_request, probe_points, reverse_geocode_request,
                      svi_image_request, svi_metadata_request)

__all__ = [
    "Address", "GeoContext", "ImageRef", "ImageStatus", "Mode", "NearbyPlace",
    "RetrievalConfig", "CanonicalRequest", "FixtureStore", "RateLimiter",
    "Transport", "TransportResponse", "ResponseCache", "Retriever",
    "nearby_places_request", "parse_address", "parse_places", "poi_request",
    "probe_points", "reverse_geocode_request", "svi_image_request",
    "svi_metadata_request",
]
