"""Forward and reverse geocoding behind one client.

The client is transport-agnostic: the live transport speaks the OpenCage v1
JSON shape over HTTP, the fixture transport replays committed response
files, and tests inject callables. Every response passes through an
append-only JSONL disk cache keyed by the normalized query, so a warm cache
makes the client a pure function and sends zero requests. A sliding-window
rate limiter is the single point of coordination between workers.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from collections import deque
from pathlib import Path
from typing import Callable, Optional

from .geo import GeoPoint
from .rewards import AddressHierarchy

log = logging.getLogger(__name__)

GEOCODE_URL_ENV = "GEOSEEK_GEOCODE_URL"
GEOCODE_KEY_ENV = "GEOSEEK_GEOCODE_KEY"
GEOCODE_RPS_ENV = "GEOSEEK_GEOCODE_RPS"

DEFAULT_URL = "https://api.opencagedata.com/geocode/v1/json"

# How each address level is filled from the provider's component fields,
# first nonempty wins. The precise level prefers house number + road.
REGION_COMPONENTS = ("state", "province", "county")
PRECISE_COMPONENTS = ("neighbourhood", "city")


class TransportError(Exception):
    """Request could not be served. retryable=False skips the backoff loop."""

    def __init__(self, message: str, code: str = "network", retryable: bool = True):
        super().__init__(message)
        self.code = code
        self.retryable = retryable


class QuotaExceededError(TransportError):
    def __init__(self, message: str = "provider quota exceeded"):
        super().__init__(message, code="quota", retryable=False)


def normalize_query(text: str) -> str:
    return re.sub(r"\s+", " ", text.casefold().strip())


def _point_key(point: GeoPoint) -> str:
    return f"{point.lat:.6f},{point.lon:.6f}"


class RateLimiter:
    """Sliding one-second window: at most `rps` acquisitions per second.

    Clock and sleep are injectable so the limit can be tested against a
    virtual clock without real waiting.
    """

    def __init__(self, rps: float, clock=time.monotonic, sleep=time.sleep):
        if rps <= 0:
            raise ValueError(f"rps must be positive, got {rps}")
        self.rps = rps
        self._clock = clock
        self._sleep = sleep
        self._sent: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                while self._sent and now - self._sent[0] >= 1.0:
                    self._sent.popleft()
                if len(self._sent) < self.rps:
                    self._sent.append(now)
                    return
                self._sleep(self._sent[0] + 1.0 - now)


class GeocodeCache:
    """Append-only JSONL cache file: one {"key", "ts", "response"} object
    per line, UTF-8, LF line endings. Later lines win on duplicate keys.
    Readers share the in-memory map; appends are serialized."""

    def __init__(self, path):
        self.path = Path(path)
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    row = json.loads(line)
                    self._entries[row["key"]] = row["response"]

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[dict]:
        return self._entries.get(key)

    def put(self, key: str, response: dict) -> None:
        with self._lock:
            self._entries[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"key": key, "ts": time.time(), "response": response},
                        ensure_ascii=False,
                    )
                    + "\n"
                )


# A transport takes the normalized query string and returns the parsed
# provider JSON, raising TransportError when the request cannot be served.
Transport = Callable[[str], dict]


def http_transport(
    url: Optional[str] = None, key: Optional[str] = None, session=None
) -> Transport:
    """Live OpenCage-shaped transport. Requires an API key."""
    url = url or os.environ.get(GEOCODE_URL_ENV) or DEFAULT_URL
    key = key or os.environ.get(GEOCODE_KEY_ENV)
    if not key:
        raise TransportError(
            f"no geocoding key: set {GEOCODE_KEY_ENV}", code="config", retryable=False
        )
    if session is None:
        import requests

        session = requests.Session()

    def send(query: str) -> dict:
        try:
            resp = session.get(url, params={"q": query, "key": key}, timeout=10)
        except Exception as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if resp.status_code in (402, 429):
            raise QuotaExceededError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}")
        return resp.json()

    return send


def fixture_transport(directory) -> Transport:
    """Replay transport: each query maps to a committed JSON file named by
    `fixture_filename`. A missing fixture is a non-retryable failure."""
    directory = Path(directory)

    def send(query: str) -> dict:
        path = directory / fixture_filename(query)
        if not path.exists():
            raise TransportError(
                f"no fixture for query {query!r} ({path.name})",
                code="fixture-missing",
                retryable=False,
            )
        return json.loads(path.read_text("utf-8"))

    return send


def fixture_filename(query: str) -> str:
    """Stable, readable fixture file name for a normalized query."""
    slug = re.sub(r"[^A-Za-z0-9_.-]+", "_", query)
    return f"{slug}.json"


class GeocodeClient:
    """Cache-first geocoder with retries, rate limiting, and degradation
    accounting.

    Failed lookups return None (the reward pipeline scores those as zero
    spatial reward); every terminal transport failure increments
    `degraded` by error code so callers can flag the run.
    """

    def __init__(
        self,
        transport: Transport,
        cache: Optional[GeocodeCache] = None,
        limiter: Optional[RateLimiter] = None,
        retries: int = 3,
        backoff: float = 0.5,
        sleep=time.sleep,
    ):
        self._transport = transport
        self._cache = cache
        self._limiter = limiter
        self._retries = retries
        self._backoff = backoff
        self._sleep = sleep
        self.requests_sent = 0
        self.degraded: dict[str, int] = {}

    @classmethod
    def from_env(cls, cache_path=None, fixtures=None, session=None) -> "GeocodeClient":
        """Fixture transport when a fixtures directory is given, otherwise
        the live transport configured from GEOSEEK_GEOCODE_* variables."""
        cache = GeocodeCache(cache_path) if cache_path else None
        rps = float(os.environ.get(GEOCODE_RPS_ENV, "1"))
        limiter = RateLimiter(rps)
        if fixtures:
            return cls(fixture_transport(fixtures), cache=cache, limiter=limiter)
        return cls(http_transport(session=session), cache=cache, limiter=limiter)

    def _lookup(self, key: str, query: str) -> Optional[dict]:
        if self._cache is not None:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        response = None
        for attempt in range(self._retries):
            if self._limiter is not None:
                self._limiter.acquire()
            self.requests_sent += 1
            try:
                response = self._transport(query)
                break
            except TransportError as exc:
                log.warning("geocode attempt %d failed (%s): %s", attempt + 1, exc.code, exc)
                if not exc.retryable or attempt + 1 >= self._retries:
                    self.degraded[exc.code] = self.degraded.get(exc.code, 0) + 1
                    return None
                self._sleep(self._backoff * (2**attempt))
        if response is not None and self._cache is not None:
            self._cache.put(key, response)
        return response

    def forward(self, address: str) -> Optional[GeoPoint]:
        """Best-match coordinates for an address, or None. The provider's
        first result is taken as its own confidence ordering."""
        if not address or not address.strip():
            raise ValueError("address must be nonempty")
        query = normalize_query(address)
        response = self._lookup(f"fwd_{query}", query)
        if not response:
            return None
        results = response.get("results") or []
        if not results:
            return None
        geometry = results[0].get("geometry") or {}
        try:
            return GeoPoint(float(geometry["lat"]), float(geometry["lng"]))
        except (KeyError, TypeError, ValueError):
            log.warning("malformed geometry in response for %r", address)
            return None

    def reverse(self, point: GeoPoint) -> Optional[AddressHierarchy]:
        """Three-level address for a point, or None for open water / no
        result. Component fields map to levels via the priority tables."""
        query = _point_key(point)
        response = self._lookup(f"rev_{query}", query)
        if not response:
            return None
        results = response.get("results") or []
        if not results:
            return None
        components = results[0].get("components") or {}
        country = components.get("country", "")
        region = next(
            (components[f] for f in REGION_COMPONENTS if components.get(f)), ""
        )
        precise = ""
        if components.get("road"):
            house = components.get("house_number", "")
            precise = f"{house} {components['road']}".strip()
        else:
            precise = next(
                (components[f] for f in PRECISE_COMPONENTS if components.get(f)), ""
            )
        if not (country or region or precise):
            return None
        return AddressHierarchy(country=country, region=region, precise=precise)
