"""Activity tracks: GPX and Strava stream parsing, segmentation.

Timestamps are truncated to whole seconds on the way in so that segment
durations and gap accounting stay exact integers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Optional
from xml.etree import ElementTree as ET

from .errors import ArrayLengthMismatch, EmptyTrack, MalformedInput, NoTimestamps
from .timeutil import format_utc, parse_utc

log = logging.getLogger(__name__)

HR_MIN_BPM = 25.0
HR_MAX_BPM = 260.0
DEFAULT_MAX_GAP_S = 60


class Sport(str, Enum):
    RUN = "run"
    RIDE = "ride"
    WALK = "walk"
    OTHER = "other"

    @classmethod
    def guess(cls, text: Optional[str]) -> "Sport":
        if not text:
            return cls.OTHER
        t = text.strip().lower()
        if any(k in t for k in ("ride", "cycl", "bik")):
            return cls.RIDE
        if "run" in t:
            return cls.RUN
        if "walk" in t or "hik" in t:
            return cls.WALK
        return cls.OTHER


@dataclass(frozen=True)
class TrackPoint:
    timestamp: datetime
    lat: float
    lon: float
    elevation_m: Optional[float] = None
    heart_rate_bpm: Optional[float] = None
    power_w: Optional[float] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise MalformedInput(f"coordinates out of bounds: {self.lat}, {self.lon}")
        if self.heart_rate_bpm is not None and not HR_MIN_BPM < self.heart_rate_bpm < HR_MAX_BPM:
            raise MalformedInput(f"implausible heart rate {self.heart_rate_bpm}")
        if self.power_w is not None and self.power_w < 0:
            raise MalformedInput(f"negative power {self.power_w}")


@dataclass(frozen=True)
class ActivityTrack:
    activity_id: str
    sport: Sport
    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise EmptyTrack(f"activity {self.activity_id!r} has {len(self.points)} point(s), need 2")
        for a, b in zip(self.points, self.points[1:]):
            if not a.timestamp < b.timestamp:
                raise MalformedInput("track points must be strictly increasing in time")

    @property
    def start(self) -> datetime:
        return self.points[0].timestamp

    @property
    def elapsed_s(self) -> int:
        return int((self.points[-1].timestamp - self.points[0].timestamp).total_seconds())


@dataclass(frozen=True)
class Segment:
    """Interval between two consecutive track points."""

    index: int  # position of the first endpoint in the track
    start: tuple[float, float]
    end: tuple[float, float]
    lat: float
    lon: float
    t_mid: datetime
    duration_s: float


class Segments(list):
    """List of kept segments; dropped intervals are kept in ``gaps``."""

    def __init__(self, items=(), gaps=()):
        super().__init__(items)
        self.gaps: list[tuple[datetime, datetime]] = list(gaps)

    @property
    def gap_s(self) -> float:
        return sum((b - a).total_seconds() for a, b in self.gaps)


def _sanitize_hr(hr: Optional[float], counter: dict) -> Optional[float]:
    if hr is None:
        return None
    if HR_MIN_BPM < hr < HR_MAX_BPM:
        return hr
    counter["implausible_hr"] = counter.get("implausible_hr", 0) + 1
    return None


def _finish(activity_id: str, sport: Sport, raw: list[TrackPoint]) -> ActivityTrack:
    # stable sort keeps file order among equal timestamps, so the dict keeps the last one
    by_time: dict[datetime, TrackPoint] = {}
    for p in sorted(raw, key=lambda p: p.timestamp):
        by_time[p.timestamp] = p
    points = tuple(by_time.values())
    if len(points) < 2:
        raise EmptyTrack(f"activity {activity_id!r} has fewer than 2 valid points")
    return ActivityTrack(activity_id, sport, points)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _child_text(elem: ET.Element, name: str) -> Optional[str]:
    for child in elem:
        if _local(child.tag) == name:
            return child.text
    return None


def _ext_value(elem: ET.Element, names: tuple[str, ...]) -> Optional[float]:
    for sub in elem.iter():
        if _local(sub.tag) in names and sub.text and sub.text.strip():
            return float(sub.text)
    return None


def _whole_seconds(dt: datetime) -> datetime:
    return dt.replace(microsecond=0)


def parse_gpx(data: bytes, activity_id: Optional[str] = None) -> ActivityTrack:
    """Parse a GPX 1.1 document into an ActivityTrack.

    Heart rate and power are read from any extension element named ``hr``
    or ``power`` (Garmin TrackPointExtension and friends).
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedInput(f"GPX is not well-formed XML: {exc}") from exc
    if _local(root.tag) != "gpx":
        raise MalformedInput(f"root element is <{_local(root.tag)}>, expected <gpx>")

    name = sport_text = None
    for trk in root.iter():
        if _local(trk.tag) == "trk":
            name = _child_text(trk, "name")
            sport_text = _child_text(trk, "type")
            break

    dropped: dict = {}
    raw = []
    for pt in root.iter():
        if _local(pt.tag) != "trkpt":
            continue
        try:
            lat = float(pt.attrib["lat"])
            lon = float(pt.attrib["lon"])
        except (KeyError, ValueError) as exc:
            raise MalformedInput("trkpt without numeric lat/lon") from exc
        when = _child_text(pt, "time")
        if not when or not when.strip():
            raise NoTimestamps("GPX track point without <time>")
        ele = _child_text(pt, "ele")
        try:
            hr = _ext_value(pt, ("hr", "HeartRateBpm"))
            power = _ext_value(pt, ("power", "PowerInWatts", "Watts"))
            raw.append(
                TrackPoint(
                    timestamp=_whole_seconds(parse_utc(when)),
                    lat=lat,
                    lon=lon,
                    elevation_m=float(ele) if ele and ele.strip() else None,
                    heart_rate_bpm=_sanitize_hr(hr, dropped),
                    power_w=power,
                )
            )
        except ValueError as exc:
            raise MalformedInput(f"bad track point value: {exc}") from exc
    if dropped:
        log.warning("GPX: discarded values %s", dropped)
    return _finish(activity_id or name or "gpx", Sport.guess(sport_text), raw)


def _stream(obj: dict, key: str):
    value = obj.get(key)
    # Strava's key_by_type responses wrap each stream as {"data": [...]}
    if isinstance(value, dict):
        value = value.get("data")
    return value


def parse_strava_streams(data: bytes) -> ActivityTrack:
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedInput(f"stream JSON is malformed: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedInput("stream JSON must be an object")

    times = _stream(obj, "time")
    latlng = _stream(obj, "latlng")
    if times is None or latlng is None:
        raise MalformedInput("stream JSON needs both 'time' and 'latlng'")
    if "start_date" not in obj:
        raise NoTimestamps("stream JSON lacks 'start_date'")
    optional = {k: _stream(obj, k) for k in ("heartrate", "watts", "altitude")}
    for key, arr in [("latlng", latlng)] + [(k, v) for k, v in optional.items() if v is not None]:
        if len(arr) != len(times):
            raise ArrayLengthMismatch(f"'{key}' has {len(arr)} entries, 'time' has {len(times)}")

    try:
        start = _whole_seconds(parse_utc(obj["start_date"]))
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad start_date: {exc}") from exc

    dropped: dict = {}
    raw = []
    try:
        for i, offset in enumerate(times):
            hr = optional["heartrate"][i] if optional["heartrate"] is not None else None
            watts = optional["watts"][i] if optional["watts"] is not None else None
            alt = optional["altitude"][i] if optional["altitude"] is not None else None
            lat, lon = latlng[i]
            raw.append(
                TrackPoint(
                    timestamp=start + timedelta(seconds=int(offset)),
                    lat=float(lat),
                    lon=float(lon),
                    elevation_m=None if alt is None else float(alt),
                    heart_rate_bpm=_sanitize_hr(None if hr is None else float(hr), dropped),
                    power_w=None if watts is None else float(watts),
                )
            )
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad stream value: {exc}") from exc
    if dropped:
        log.warning("streams: discarded values %s", dropped)
    sport = Sport.guess(obj.get("sport_type") or obj.get("type"))
    return _finish(str(obj.get("id", "strava")), sport, raw)


def midpoint(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    """Arithmetic lat/lon midpoint, taking the short way across the antimeridian."""
    lon_a, lon_b = a[1], b[1]
    if lon_b - lon_a > 180.0:
        lon_b -= 360.0
    elif lon_a - lon_b > 180.0:
        lon_b += 360.0
    lon = (lon_a + lon_b) / 2.0
    if lon > 180.0:
        lon -= 360.0
    elif lon < -180.0:
        lon += 360.0
    return (a[0] + b[0]) / 2.0, lon


def segmentize(track: ActivityTrack, max_gap_s: float = DEFAULT_MAX_GAP_S) -> Segments:
    if max_gap_s <= 0:
        raise ValueError("max_gap_s must be positive")
    kept, gaps = [], []
    pts = track.points
    for i, (a, b) in enumerate(zip(pts, pts[1:])):
        dt = (b.timestamp - a.timestamp).total_seconds()
        if dt > max_gap_s:
            gaps.append((a.timestamp, b.timestamp))
            continue
        lat, lon = midpoint((a.lat, a.lon), (b.lat, b.lon))
        kept.append(
            Segment(
                index=i,
                start=(a.lat, a.lon),
                end=(b.lat, b.lon),
                lat=lat,
                lon=lon,
                t_mid=a.timestamp + (b.timestamp - a.timestamp) / 2,
                duration_s=dt,
            )
        )
    return Segments(kept, gaps)


def track_to_dict(track: ActivityTrack) -> dict:
    """Canonical internal JSON form of a track."""
    return {
        "activity_id": track.activity_id,
        "sport": track.sport.value,
        "points": [
            {
                "t": format_utc(p.timestamp),
                "lat": p.lat,
                "lon": p.lon,
                "ele": p.elevation_m,
                "hr": p.heart_rate_bpm,
                "power": p.power_w,
            }
            for p in track.points
        ],
    }


def track_from_dict(obj: dict) -> ActivityTrack:
    try:
        points = tuple(
            TrackPoint(
                timestamp=parse_utc(p["t"]),
                lat=p["lat"],
                lon=p["lon"],
                elevation_m=p.get("ele"),
                heart_rate_bpm=p.get("hr"),
                power_w=p.get("power"),
            )
            for p in obj["points"]
        )
        return ActivityTrack(obj["activity_id"], Sport(obj["sport"]), points)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad canonical track JSON: {exc}") from exc


def load_activity(path) -> ActivityTrack:
    """Dispatch on content: GPX XML, Strava streams, or canonical track JSON."""
    from pathlib import Path

    path = Path(path)
    data = path.read_bytes()
    head = data.lstrip()[:1]
    if head == b"<":
        return parse_gpx(data, activity_id=path.stem)
    if head == b"{":
        try:
            obj = json.loads(data)
        except ValueError as exc:
            raise MalformedInput(f"{path.name}: {exc}") from exc
        if isinstance(obj, dict) and "points" in obj and "latlng" not in obj:
            return track_from_dict(obj)
        return parse_strava_streams(data)
    raise MalformedInput(f"{path.name}: not GPX or JSON")
