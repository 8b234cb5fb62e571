"""HTTP transport with global rate limiting and record/replay fixtures.

Every outbound request is canonicalized (method + redacted URL + body)
and hashed; that hash names the fixture file. Record mode sends live and
persists the response, replay mode reads the fixture and never opens a
socket. Secrets are injected only at send time and never reach disk.
"""

from __future__ import annotations

import base64
import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import FixtureMiss, ProviderError
from .types import Mode, RetrievalConfig


@dataclass(frozen=True)
class CanonicalRequest:
    method: str
    url: str                  # secrets already redacted
    body: str = ""
    provider: str = "default"  # rate-limit bucket
    # substituted into the URL at send time only; excluded from the key
    secret_params: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    def key(self) -> str:
        payload = f"{self.method}\n{self.url}\n{self.body}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def send_url(self) -> str:
        url = self.url
        for name, value in self.secret_params:
            url = url.replace(f"{name}=REDACTED", f"{name}={value}")
        return url


@dataclass
class TransportResponse:
    status: int
    body: bytes

    def json(self) -> dict:
        try:
            return json.loads(self.body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ProviderError(f"unparseable provider response: {e}") from e


class RateLimiter:
    """Minimum-interval limiter, one bucket per provider, thread-safe."""

    def __init__(self, requests_per_second: dict[str, float], sleep=time.sleep):
        self._intervals = {name: (1.0 / rps if rps > 0 else 0.0)
                           for name, rps in requests_per_second.items()}
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()
        self._sleep = sleep

    def wait(self, provider: str) -> None:
        interval = self._intervals.get(provider, 0.0)
        if interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            last = self._last.get(provider)
            if last is not None and now < last + interval:
                self._sleep(last + interval - now)
                now = time.monotonic()
            self._last[provider] = now


class FixtureStore:
    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def load(self, req: CanonicalRequest) -> TransportResponse:
        path = self._path(req.key())
        if not path.exists():
            raise FixtureMiss(
                f"no fixture for {req.method} {req.url} (key {req.key()[:12]}...)")
        data = json.loads(path.read_text())
        return TransportResponse(status=data["response"]["status"],
                                 body=base64.b64decode(data["response"]["body_b64"]))

    def store(self, req: CanonicalRequest, resp: TransportResponse) -> None:
        path = self._path(req.key())
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "request": {"method": req.method, "url": req.url, "body": req.body,
                        "provider": req.provider},
            "response": {"status": resp.status,
                         "body_b64": base64.b64encode(resp.body).decode("ascii")},
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True))
        tmp.replace(path)

    def store_json(self, req: CanonicalRequest, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.store(req, TransportResponse(status=status, body=body))

    def store_bytes(self, req: CanonicalRequest, body: bytes, status: int = 200) -> None:
        self.store(req, TransportResponse(status=status, body=body))


class Transport:
    """Routes canonical requests per the configured mode.

    calls counts every request entering the transport (cache misses);
    network_calls counts only live sends. Replay keeps network_calls at
    zero by construction.
    """

    def __init__(self, cfg: RetrievalConfig, session=None, sleep=time.sleep):
        self.cfg = cfg
        self.fixtures = FixtureStore(Path(cfg.cache_dir) / "fixtures")
        self.limiter = RateLimiter(cfg.rate_limits, sleep=sleep)
        self._session = session
        self._sleep = sleep
        self._lock = threading.Lock()
        self.calls = 0
        self.network_calls = 0

    def _ensure_session(self):
        if self._session is None:
            import requests
            self._session = requests.Session()
        return self._session

    def request(self, req: CanonicalRequest) -> TransportResponse:
        with self._lock:
            self.calls += 1
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries):
            if attempt:
                self._sleep(self.cfg.retry_base_s * 2 ** (attempt - 1))
            try:
                resp = self._attempt(req)
            except FixtureMiss:
                raise
            except ProviderError as e:
                last_error = e
                continue
            if resp.status >= 500:
                last_error = ProviderError(
                    f"{req.provider} returned HTTP {resp.status} for {req.url}")
                continue
            return resp
        raise ProviderError(
            f"{req.provider} failed after {self.cfg.max_retries} attempts: {last_error}")

    def _attempt(self, req: CanonicalRequest) -> TransportResponse:
        if self.cfg.mode is Mode.REPLAY:
            return self.fixtures.load(req)
        resp = self._send(req)
        if self.cfg.mode is Mode.RECORD:
            self.fixtures.store(req, resp)
        return resp

    def _send(self, req: CanonicalRequest) -> TransportResponse:
        import requests as requests_lib
        self.limiter.wait(req.provider)
        with self._lock:
            self.network_calls += 1
        session = self._ensure_session()
        try:
            r = session.request(req.method, req.send_url(),
                                data=req.body.encode("utf-8") if req.body else None,
                                timeout=self.cfg.timeout_s)
        except requests_lib.RequestException as e:
            raise ProviderError(f"transport failure for {req.url}: {e}") from e
        return TransportResponse(status=r.status_code, body=r.content)
