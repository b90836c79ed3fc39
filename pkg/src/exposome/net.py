"""Live-data adapters for measurements and routes.

Sources return raw bytes/dicts in the same wire shapes the parsers
accept, so fixture replays and HTTP clients are interchangeable.
API keys come only from the environment (EXPOSOME_AQ_KEY,
EXPOSOME_ROUTE_KEY).
"""

from __future__ import annotations

import json
import logging
import os
import time
from datetime import datetime
from typing import Callable, Iterable, Optional, Protocol, Sequence, Union

from .airquality import MeasurementBatch, Pollutant, parse_openaq_json
from .errors import MalformedInput, NoRouteFound, QuotaExceeded, SourceUnavailable
from .route import Mode, PlannedRoute, decode_polyline
from .timeutil import format_utc

log = logging.getLogger(__name__)

AQ_KEY_ENV = "EXPOSOME_AQ_KEY"
ROUTE_KEY_ENV = "EXPOSOME_ROUTE_KEY"

ATTEMPTS = 3
BACKOFF_BASE_S = 1.0
DEFAULT_TIMEOUT_S = 30.0
PAGE_LIMIT = 100


class SourceError(Exception):
    """Raised by a source for one failed request."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status

    @property
    def transient(self) -> bool:
        return self.status is None or self.status == 429 or self.status >= 500


class AqSource(Protocol):
    def fetch(self, bbox, date_from: datetime, date_to: datetime, pollutants, page: int, limit: int) -> bytes: ...


class RouteSource(Protocol):
    def fetch(self, origin, destination, mode: Mode) -> dict: ...


def with_retries(call: Callable, attempts: int = ATTEMPTS, base_s: float = BACKOFF_BASE_S,
                 timeout_s: float = DEFAULT_TIMEOUT_S, sleep=time.sleep, clock=time.monotonic):
    """Run ``call`` with exponential backoff (base_s, 2·base_s, ...).

    HTTP 429 on the final attempt surfaces as QuotaExceeded; anything
    else exhausted becomes SourceUnavailable.
    """
    deadline = clock() + timeout_s
    last: Optional[SourceError] = None
    for attempt in range(attempts):
        try:
            return call()
        except SourceError as exc:
            last = exc
            if not exc.transient:
                break
            log.info("attempt %d failed: %s", attempt + 1, exc)
            if attempt == attempts - 1:
                break
            delay = base_s * 2 ** attempt
            if clock() + delay > deadline:
                break
            sleep(delay)
    if last is not None and last.status == 429:
        raise QuotaExceeded(f"rate limited after {attempts} attempts") from last
    raise SourceUnavailable(f"source failed: {last}") from last


def fetch_measurements(source: AqSource, bbox, date_from: datetime, date_to: datetime,
                       pollutants: Iterable = (), *, limit: int = PAGE_LIMIT, **retry) -> MeasurementBatch:
    """Fetch every page for the window and parse them into one batch."""
    if not date_from < date_to:
        raise ValueError("date_from must precede date_to")
    min_lon, min_lat, max_lon, max_lat = bbox
    if not (-180 <= min_lon <= max_lon <= 180 and -90 <= min_lat <= max_lat <= 90):
        raise ValueError(f"invalid bbox {bbox}")
    pollutants = tuple(pollutants)
    out = MeasurementBatch()
    page = 1
    while True:
        raw = with_retries(lambda: source.fetch(bbox, date_from, date_to, pollutants, page, limit), **retry)
        batch = parse_openaq_json(raw)
        out.extend(batch)
        obj = json.loads(raw)
        n = len(obj["results"])
        found = (obj.get("meta") or {}).get("found")
        if n == 0 or (isinstance(found, int) and page * limit >= found) or (found is None and n < limit):
            return out
        page += 1


def fetch_route(source: RouteSource, origin, destination, mode: Mode, departure: datetime,
                precision: int = 5, **retry) -> PlannedRoute:
    for lat, lon in (origin, destination):
        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
            raise ValueError(f"invalid coordinate {(lat, lon)}")
    resp = with_retries(lambda: source.fetch(tuple(origin), tuple(destination), Mode(mode)), **retry)
    encoded = resp.get("polyline")
    if not encoded:
        raise NoRouteFound("routing response carries no polyline")
    points = decode_polyline(encoded, precision)
    try:
        return PlannedRoute(tuple(points), Mode(mode), departure)
    except MalformedInput as exc:
        raise NoRouteFound(str(exc)) from exc


class FixtureAqSource:
    """Replays a fixed sequence of pages; items may be bytes or SourceError instances."""

    def __init__(self, responses: Sequence[Union[bytes, SourceError]]):
        self.responses = list(responses)
        self.calls: list = []

    def fetch(self, bbox, date_from, date_to, pollutants, page, limit) -> bytes:
        self.calls.append((bbox, date_from, date_to, pollutants, page, limit))
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class FixtureRouteSource:
    """Routes keyed by (origin, destination); origin == destination has no route."""

    def __init__(self, routes: dict):
        self.routes = {(tuple(o), tuple(d)): r for (o, d), r in routes.items()}

    def fetch(self, origin, destination, mode) -> dict:
        if tuple(origin) == tuple(destination):
            raise NoRouteFound("origin equals destination")
        try:
            return self.routes[(tuple(origin), tuple(destination))]
        except KeyError:
            raise NoRouteFound(f"no fixture route {origin} -> {destination}") from None


class HttpAqSource:
    """OpenAQ-compatible measurements endpoint."""

    def __init__(self, base_url: str = "https://api.openaq.org/v2/measurements", request_timeout_s: float = 10.0):
        self.base_url = base_url
        self.request_timeout_s = request_timeout_s

    def fetch(self, bbox, date_from, date_to, pollutants, page, limit) -> bytes:
        import requests

        params = {
            "date_from": format_utc(date_from),
            "date_to": format_utc(date_to),
            "bbox": ",".join(str(v) for v in bbox),
            "page": page,
            "limit": limit,
        }
        if pollutants:
            params["parameter"] = [Pollutant(p).value.lower() for p in pollutants]
        headers = {"X-API-Key": os.environ[AQ_KEY_ENV]} if os.environ.get(AQ_KEY_ENV) else {}
        try:
            resp = requests.get(self.base_url, params=params, headers=headers, timeout=self.request_timeout_s)
        except requests.RequestException as exc:
            raise SourceError(str(exc)) from exc
        if resp.status_code != 200:
            raise SourceError(f"HTTP {resp.status_code}", resp.status_code)
        return resp.content


_GOOGLE_MODES = {Mode.WALK: "walking", Mode.RUN: "walking", Mode.CYCLE: "bicycling", Mode.DRIVE: "driving"}


class HttpRouteSource:
    """Google Directions-style endpoint; returns the overview polyline."""

    def __init__(self, base_url: str = "https://maps.googleapis.com/maps/api/directions/json",
                 request_timeout_s: float = 10.0):
        self.base_url = base_url
        self.request_timeout_s = request_timeout_s

    def fetch(self, origin, destination, mode) -> dict:
        import requests

        params = {
            "origin": f"{origin[0]},{origin[1]}",
            "destination": f"{destination[0]},{destination[1]}",
            "mode": _GOOGLE_MODES[Mode(mode)],
        }
        if os.environ.get(ROUTE_KEY_ENV):
            params["key"] = os.environ[ROUTE_KEY_ENV]
        try:
            resp = requests.get(self.base_url, params=params, timeout=self.request_timeout_s)
        except requests.RequestException as exc:
            raise SourceError(str(exc)) from exc
        if resp.status_code != 200:
            raise SourceError(f"HTTP {resp.status_code}", resp.status_code)
        body = resp.json()
        status = body.get("status", "OK")
        if status == "OVER_QUERY_LIMIT":
            raise SourceError(status, 429)
        if status in ("ZERO_RESULTS", "NOT_FOUND") or not body.get("routes"):
            raise NoRouteFound(status)
        route = body["routes"][0]
        return {"polyline": route["overview_polyline"]["points"], "legs": route.get("legs", [])}
