"""Great-circle distance and the nearest-station spatiotemporal join.

Stations are embedded on the unit sphere and held in a k-d tree per
pollutant. The tree only prefilters; every candidate is then ranked by
haversine distance so results match an exhaustive scan exactly.

Ranking among candidates is lexicographic:
distance_km, then |Δt| of the station's best measurement, then the later
measurement timestamp, then station_id.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import UnknownStation

EARTH_RADIUS_KM = 6371.0088
DEFAULT_MAX_DISTANCE_KM = 50.0
DEFAULT_MAX_TIME_OFFSET_S = 5400.0


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    # sin² of the half-differences is even, so swapping a and b gives the same bits
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


def _unit_vectors(latlon: np.ndarray) -> np.ndarray:
    lat = np.radians(latlon[:, 0])
    lon = np.radians(latlon[:, 1])
    return np.column_stack((np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)))


def _chord(distance_km: float) -> float:
    theta = min(distance_km / EARTH_RADIUS_KM, math.pi)
    return 2.0 * math.sin(theta / 2.0)


class NoMatchReason(str, Enum):
    NO_STATION = "NoStation"
    TOO_FAR = "TooFar"
    NO_TIMELY_MEASUREMENT = "NoTimelyMeasurement"


@dataclass(frozen=True)
class NoMatch:
    reason: NoMatchReason

    matched = False


@dataclass(frozen=True)
class JoinResult:
    station_id: str
    distance_km: float
    measurement: object  # airquality.Measurement
    time_offset_s: float

    matched = True


class _Series:
    """Time-sorted readings of one pollutant at one station."""

    __slots__ = ("times", "items")

    def __init__(self, pairs: dict):
        self.times = sorted(pairs)
        self.items = [pairs[t] for t in self.times]

    def nearest(self, t: float):
        """(|Δt|, timestamp, measurement) minimizing |Δt|; ties go to the later reading."""
        i = bisect_left(self.times, t)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(self.times):
                cand = (abs(self.times[j] - t), -self.times[j], j)
                if best is None or cand < best:
                    best = cand
        off, neg_t, j = best
        return off, -neg_t, self.items[j]


class StationIndex:
    def __init__(self, stations, series, trees):
        self.stations = stations
        self._series = series
        self._trees = trees

    def __len__(self):
        return len(self.stations)

    @classmethod
    def build(cls, stations: Iterable, measurements: Iterable) -> "StationIndex":
        from .timeutil import to_epoch

        stations = {s.station_id: s for s in stations}
        buckets: dict = {}
        for m in measurements:
            if m.station_id not in stations:
                raise UnknownStation(f"measurement references unknown station {m.station_id!r}")
            # later ingestion overwrites an earlier reading at the same instant
            buckets.setdefault((m.station_id, m.pollutant), {})[to_epoch(m.timestamp)] = m
        series = {key: _Series(pairs) for key, pairs in buckets.items()}

        trees = {}
        for pollutant in sorted({p for _, p in series}, key=lambda p: p.value):
            ids = sorted(sid for sid, p in series if p is pollutant)
            coords = np.array([[stations[s].lat, stations[s].lon] for s in ids], dtype=float)
            trees[pollutant] = (ids, cKDTree(_unit_vectors(coords)))
        return cls(stations, series, trees)

    def query(
        self,
        lat: float,
        lon: float,
        t: float,
        pollutant,
        max_time_offset_s: float = DEFAULT_MAX_TIME_OFFSET_S,
        max_distance_km: float = DEFAULT_MAX_DISTANCE_KM,
    ) -> Union[JoinResult, NoMatch]:
        """Nearest station reporting ``pollutant`` with a reading within the time window.

        ``t`` is POSIX seconds.
        """
        entry = self._trees.get(pollutant)
        if entry is None:
            return NoMatch(NoMatchReason.NO_STATION)
        ids, tree = entry
        here = _unit_vectors(np.array([[lat, lon]], dtype=float))[0]
        # pad the chord radius so the prefilter is a strict superset of the haversine disc
        radius = _chord(max_distance_km) * (1.0 + 1e-9) + 1e-12
        hits = tree.query_ball_point(here, radius)

        candidates = []
        for k in hits:
            sid = ids[k]
            st = self.stations[sid]
            d = haversine_km((lat, lon), (st.lat, st.lon))
            if d <= max_distance_km:
                candidates.append((d, sid))
        if not candidates:
            return NoMatch(NoMatchReason.TOO_FAR)

        best: Optional[tuple] = None
        for d, sid in candidates:
            if best is not None and d > best[0]:
                continue
            off, ts, m = self._series[(sid, pollutant)].nearest(t)
            if off > max_time_offset_s:
                continue
            key = (d, off, -ts, sid)
            if best is None or key < best[:4]:
                best = key + (m,)
        if best is None:
            return NoMatch(NoMatchReason.NO_TIMELY_MEASUREMENT)
        d, off, _, sid, m = best
        return JoinResult(sid, d, m, off)
