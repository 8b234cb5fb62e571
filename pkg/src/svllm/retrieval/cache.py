"""Persistent response cache for retrieval operations.

Keys combine the operation name, the query point rounded to 6 decimal
places (~0.11 m, below street-view positional resolution), and the
parameters that change the answer (radii, limits, image geometry).
Layout: <cache_dir>/<op>/<geohash-prefix>/<key>.json, images
content-addressed under <cache_dir>/img/.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from ..geo import GeoPoint, geohash


class ResponseCache:
    def __init__(self, cache_dir: Path):
        self.root = Path(cache_dir)

    def _key(self, op: str, point: GeoPoint, params: dict) -> str:
        canon = json.dumps(params, sort_keys=True, separators=(",", ":"))
        raw = f"{op}|{point.lat:.6f}|{point.lon:.6f}|{canon}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def _path(self, op: str, point: GeoPoint, params: dict) -> Path:
        shard = geohash(point.lat, point.lon, precision=5)[:4]
        return self.root / op / shard / f"{self._key(op, point, params)}.json"

    def get(self, op: str, point: GeoPoint, params: dict) -> dict | None:
        path = self._path(op, point, params)
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def put(self, op: str, point: GeoPoint, params: dict, payload: dict) -> None:
        path = self._path(op, point, params)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True))
        tmp.replace(path)

    def put_image(self, content: bytes) -> tuple[str, str]:
        """Store image bytes content-addressed; returns (relative path, hash)."""
        digest = hashlib.sha256(content).hexdigest()
        rel = f"img/{digest}.jpg"
        path = self.root / rel
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(content)
            tmp.replace(path)
        return rel, digest
