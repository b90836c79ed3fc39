"""Planned-route exposure forecasts and the encoded-polyline codec."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Sequence

from .activity import Segment, midpoint
from .errors import ConfigError, MalformedInput, MalformedPolyline
from .geo import haversine_km
from .physio import PhysioProfile, VentilationSample, rate_from_effort, tidal_volume_l
from .timeutil import parse_utc


def _encode_value(v: int) -> str:
    v = ~(v << 1) if v < 0 else v << 1
    chunks = []
    while v >= 0x20:
        chunks.append(chr((0x20 | (v & 0x1F)) + 63))
        v >>= 5
    chunks.append(chr(v + 63))
    return "".join(chunks)


def encode_polyline(points: Sequence[tuple[float, float]], precision: int = 5) -> str:
    factor = 10 ** precision
    out = []
    prev_lat = prev_lon = 0
    for lat, lon in points:
        ilat = math.floor(lat * factor + 0.5)
        ilon = math.floor(lon * factor + 0.5)
        out.append(_encode_value(ilat - prev_lat))
        out.append(_encode_value(ilon - prev_lon))
        prev_lat, prev_lon = ilat, ilon
    return "".join(out)


def decode_polyline(encoded: str, precision: int = 5) -> list[tuple[float, float]]:
    if precision not in (5, 6):
        raise ValueError("precision must be 5 or 6")
    factor = 10 ** precision
    values = []
    result = shift = 0
    for pos, ch in enumerate(encoded):
        b = ord(ch) - 63
        if not 0 <= b <= 63:
            raise MalformedPolyline(f"byte {ch!r} at offset {pos} is outside the polyline alphabet")
        result |= (b & 0x1F) << shift
        shift += 5
        if b < 0x20:
            values.append(~(result >> 1) if result & 1 else result >> 1)
            result = shift = 0
    if shift:
        raise MalformedPolyline("polyline ends inside a chunk")
    if len(values) % 2:
        raise MalformedPolyline("polyline has a latitude without a longitude")
    points = []
    lat = lon = 0
    for i in range(0, len(values), 2):
        lat += values[i]
        lon += values[i + 1]
        points.append((lat / factor, lon / factor))
    return points


class Mode(str, Enum):
    WALK = "walk"
    RUN = "run"
    CYCLE = "cycle"
    DRIVE = "drive"


@dataclass(frozen=True)
class ModeProfile:
    speed_kmh: float
    effort_fraction: float

    def __post_init__(self):
        if not self.speed_kmh > 0:
            raise ConfigError("mode speed must be positive")
        if not 0.0 <= self.effort_fraction <= 1.0:
            raise ConfigError("effort_fraction must lie in [0, 1]")


DEFAULT_MODES = {
    Mode.WALK: ModeProfile(5.0, 0.2),
    Mode.RUN: ModeProfile(10.0, 0.7),
    Mode.CYCLE: ModeProfile(20.0, 0.6),
    Mode.DRIVE: ModeProfile(40.0, 0.0),
}


def parse_mode(text: str) -> Mode:
    try:
        return Mode(text.strip().lower())
    except ValueError:
        raise ConfigError(
            f"unknown mode {text!r}; choose one of: {', '.join(m.value for m in Mode)}"
        ) from None


@dataclass(frozen=True)
class PlannedRoute:
    points: tuple[tuple[float, float], ...]
    mode: Mode
    departure: datetime

    def __post_init__(self):
        collapsed = []
        for p in self.points:
            p = (float(p[0]), float(p[1]))
            if not -90 <= p[0] <= 90 or not -180 <= p[1] <= 180:
                raise MalformedInput(f"route point out of bounds: {p}")
            if not collapsed or collapsed[-1] != p:
                collapsed.append(p)
        if len(collapsed) < 2:
            raise MalformedInput("a route needs at least 2 distinct points")
        object.__setattr__(self, "points", tuple(collapsed))
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def length_km(self) -> float:
        return math.fsum(haversine_km(a, b) for a, b in zip(self.points, self.points[1:]))

    @classmethod
    def from_dict(cls, obj: dict, precision: int = 5) -> "PlannedRoute":
        if "points" in obj:
            points = [tuple(p) for p in obj["points"]]
        elif "polyline" in obj:
            points = decode_polyline(obj["polyline"], precision)
        else:
            raise MalformedInput("route JSON needs 'points' or 'polyline'")
        try:
            return cls(tuple(points), parse_mode(obj["mode"]), parse_utc(obj["departure"]))
        except KeyError as exc:
            raise MalformedInput(f"route JSON lacks {exc}") from None


def route_segments(route: PlannedRoute, mode: ModeProfile):
    """Legs of the route as Segments timed at the mode's speed.

    Returns (segments, vertex times). Durations keep full float precision.
    """
    times = [route.departure]
    segments = []
    elapsed = 0.0
    for i, (a, b) in enumerate(zip(route.points, route.points[1:])):
        dur = haversine_km(a, b) / mode.speed_kmh * 3600.0
        lat, lon = midpoint(a, b)
        t0 = route.departure + timedelta(seconds=elapsed)
        elapsed += dur
        t1 = route.departure + timedelta(seconds=elapsed)
        segments.append(Segment(i, a, b, lat, lon, t0 + (t1 - t0) / 2, dur))
        times.append(t1)
    return segments, times


def forecast(route: PlannedRoute, profile: PhysioProfile, index, table, modes=None, config=None):
    """Predict exposure along a planned route.

    All lookups use the departure instant. Returns an ExposureReport
    flagged as a forecast.
    """
    from .cigarettes import cigarettes
    from .dose import DoseConfig, integrate
    from .report import build_report

    modes = modes or DEFAULT_MODES
    config = config or DoseConfig()
    mode = modes[route.mode]
    segments, times = route_segments(route, mode)
    tv = tidal_volume_l(profile)
    rate = rate_from_effort(mode.effort_fraction, profile)
    vent = [VentilationSample.of(t, rate, tv) for t in times]
    exposures, totals = integrate(segments, vent, index, config, query_time=route.departure)
    return build_report(
        activity_id=f"route-{route.mode.value}-{route.departure.strftime('%Y%m%dT%H%M%SZ')}",
        profile=profile,
        exposures=exposures,
        totals=totals,
        cigs=cigarettes(totals, table),
        table=table,
        config=config,
        forecast=True,
        extra={"mode": route.mode.value, "speed_kmh": mode.speed_kmh, "effort_fraction": mode.effort_fraction,
               "route_length_km": route.length_km, "departure": route.departure},
    )
