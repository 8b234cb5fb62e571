"""Shared fixtures. The whole suite runs with sockets disabled so any
accidental network call fails loudly instead of hanging."""

from __future__ import annotations

import socket

import pytest

from svllm.geo import BBox, GeoPoint
from svllm.retrieval.types import (Address, GeoContext, ImageRef, ImageStatus,
                                   NearbyPlace)


class _NetworkBlocked(RuntimeError):
    pass


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Forbid real socket connections for every test."""
    def _blocked(*args, **kwargs):
        raise _NetworkBlocked("network access attempted during tests")

    monkeypatch.setattr(socket.socket, "connect", _blocked)
    yield


@pytest.fixture
def bbox():
    return BBox(min_lat=-0.05, max_lat=0.05, min_lon=-0.05, max_lon=0.05)


def make_context(sample_id="sample-001", lat=0.01, lon=-0.02,
                 with_image=True, image_path="img/abc123.jpg") -> GeoContext:
    point = GeoPoint(lat, lon, sample_id)
    address = Address(
        display_name="12 Meridian Street, Old Town, Synthville, 54321",
        components=(("house_number", "12"), ("road", "Meridian Street"),
                    ("suburb", "Old Town"), ("city", "Synthville"),
                    ("postcode", "54321"), ("country", "Synthland")),
        provider="nominatim", retrieved_at="2026-01-01T00:00:00Z")
    nearby = (
        NearbyPlace("Park 3", GeoPoint(lat + 0.001, lon, "osm-1"), 111.19, "leisure=park"),
        NearbyPlace("School 1", GeoPoint(lat, lon + 0.002, "osm-2"), 222.39, "amenity=school"),
        NearbyPlace("Shop 7", GeoPoint(lat - 0.003, lon, "osm-3"), 333.58, "shop=convenience"),
    )
    if with_image:
        image = ImageRef(status=ImageStatus.AVAILABLE, local_path=image_path,
                         capture_point=point, offset_m=0.0, heading=0.0,
                         content_hash="abc123", max_offset_m=40.0)
    else:
        image = ImageRef(status=ImageStatus.MISSING)
    return GeoContext(point=point, address=address, nearby=nearby, image=image)


@pytest.fixture
def geo_context():
    return make_context()


@pytest.fixture
def geo_context_no_image():
    return make_context(with_image=False)
