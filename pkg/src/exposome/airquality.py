"""Air-quality feeds: OpenAQ-style JSON and flat CSV, normalized to µg/m³."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Iterable, Optional

from .errors import EmptyInput, MalformedInput, UnsupportedConversion
from .geo import haversine_km
from .timeutil import parse_utc

log = logging.getLogger(__name__)

# litres per mole of ideal gas at 25 °C, 1 atm
MOLAR_VOLUME_L = 24.45

MOLECULAR_WEIGHT = {
    "CO": 28.01,
    "NO2": 46.01,
    "O3": 48.00,
    "SO2": 64.07,
}

STATION_DRIFT_M = 100.0


class Pollutant(str, Enum):
    CO = "CO"
    NO2 = "NO2"
    O3 = "O3"
    SO2 = "SO2"
    PM25 = "PM25"
    PM10 = "PM10"
    BC = "BC"

    @property
    def is_gas(self) -> bool:
        return self.value in MOLECULAR_WEIGHT

    @classmethod
    def from_parameter(cls, text: str) -> Optional["Pollutant"]:
        key = text.strip().upper().replace(".", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            return None


# the six pollutants collected from public feeds; BC is opt-in
COLLECTED = (Pollutant.CO, Pollutant.NO2, Pollutant.O3, Pollutant.SO2, Pollutant.PM25, Pollutant.PM10)

_UNIT_ALIASES = {
    "µg/m³": "ug/m3",
    "μg/m³": "ug/m3",  # greek mu
    "µg/m3": "ug/m3",
    "μg/m3": "ug/m3",
    "ug/m³": "ug/m3",
    "ug/m3": "ug/m3",
    "mg/m³": "mg/m3",
    "mg/m3": "mg/m3",
    "ppm": "ppm",
    "ppb": "ppb",
}


def normalize_unit(unit: str) -> Optional[str]:
    u = unit.strip().replace("μ", "µ")
    return _UNIT_ALIASES.get(u) or _UNIT_ALIASES.get(u.lower())


def ppm_factor(pollutant: Pollutant) -> float:
    """µg/m³ per ppm for a gas."""
    if not pollutant.is_gas:
        raise UnsupportedConversion(f"no mixing-ratio conversion for particulate {pollutant.value}")
    return MOLECULAR_WEIGHT[pollutant.value] * 1000.0 / MOLAR_VOLUME_L


def convert_units(value: float, unit: str, pollutant: Pollutant) -> float:
    canon = normalize_unit(unit)
    if canon == "ug/m3":
        return float(value)
    if canon == "mg/m3":
        return float(value) * 1000.0
    if canon == "ppm":
        return float(value) * ppm_factor(pollutant)
    if canon == "ppb":
        return float(value) * ppm_factor(pollutant) / 1000.0
    raise UnsupportedConversion(f"unknown unit {unit!r}")


def to_ppm(value_ug_m3: float, pollutant: Pollutant) -> float:
    return value_ug_m3 / ppm_factor(pollutant)


@dataclass(frozen=True)
class Measurement:
    station_id: str
    pollutant: Pollutant
    value: float  # µg/m³
    timestamp: datetime
    lat: float
    lon: float
    source_ppm: Optional[float] = None

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"negative or NaN concentration {self.value}")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"coordinates out of bounds: {self.lat}, {self.lon}")


@dataclass(frozen=True)
class SensorStation:
    station_id: str
    lat: float
    lon: float
    pollutants_reported: frozenset
    drift_flagged: bool = False


class MeasurementBatch(list):
    """Parsed measurements plus per-reason counts of the records dropped."""

    def __init__(self, items=(), dropped=None):
        super().__init__(items)
        self.dropped: Counter = Counter(dropped or {})

    @property
    def record_count(self) -> int:
        return len(self) + sum(self.dropped.values())

    def extend(self, other):
        super().extend(other)
        if isinstance(other, MeasurementBatch):
            self.dropped.update(other.dropped)


def _make(station_id, parameter, value, unit, lat, lon, when) -> Measurement | str:
    """Build one Measurement or return the drop reason."""
    pollutant = Pollutant.from_parameter(str(parameter))
    if pollutant is None:
        return "unknown_parameter"
    try:
        value = float(value)
        lat, lon = float(lat), float(lon)
        ts = parse_utc(str(when))
    except (TypeError, ValueError):
        return "bad_record"
    if not value >= 0:
        return "negative_value"
    canon = normalize_unit(str(unit))
    if canon is None:
        return "unknown_unit"
    try:
        converted = convert_units(value, canon, pollutant)
    except UnsupportedConversion:
        return "unsupported_conversion"
    source_ppm = None
    if pollutant is Pollutant.CO and canon in ("ppm", "ppb"):
        source_ppm = value if canon == "ppm" else value / 1000.0
    try:
        return Measurement(str(station_id), pollutant, converted, ts, lat, lon, source_ppm)
    except ValueError:
        return "bad_record"


def _collect(rows: Iterable) -> MeasurementBatch:
    out = MeasurementBatch()
    for row in rows:
        result = row if isinstance(row, str) else _make(*row)
        if isinstance(result, str):
            out.dropped[result] += 1
        else:
            out.append(result)
    if out.dropped:
        log.info("dropped records: %s", dict(out.dropped))
    return out


def _openaq_rows(results):
    for entry in results:
        if not isinstance(entry, dict):
            yield "bad_record"
            continue
        try:
            coords = entry["coordinates"]
            date = entry["date"]
            yield (
                entry["location"],
                entry["parameter"],
                entry["value"],
                entry["unit"],
                coords["latitude"],
                coords["longitude"],
                date["utc"] if isinstance(date, dict) else date,
            )
        except (KeyError, TypeError):
            yield "bad_record"


def parse_openaq_json(data: bytes) -> MeasurementBatch:
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedInput(f"measurement JSON is malformed: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("results"), list):
        raise MalformedInput("measurement JSON needs a 'results' array")
    return _collect(_openaq_rows(obj["results"]))


CSV_HEADER = ("station_id", "parameter", "value", "unit", "lat", "lon", "utc")


def parse_measurement_csv(data: bytes) -> MeasurementBatch:
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedInput(f"CSV is not UTF-8: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not set(CSV_HEADER) <= {f.strip() for f in reader.fieldnames}:
        raise MalformedInput(f"CSV header must contain {','.join(CSV_HEADER)}")
    rows = ({k.strip(): v for k, v in r.items() if k is not None} for r in reader)
    return _collect(tuple(r.get(k) for k in CSV_HEADER) for r in rows)


def load_measurements(path) -> MeasurementBatch:
    from pathlib import Path

    path = Path(path)
    data = path.read_bytes()
    if data.lstrip()[:1] == b"{":
        return parse_openaq_json(data)
    return parse_measurement_csv(data)


def build_station_table(measurements: Iterable[Measurement]) -> list[SensorStation]:
    first: dict[str, tuple[float, float]] = {}
    seen: dict[str, set] = {}
    drifted: set[str] = set()
    for m in measurements:
        if m.station_id not in first:
            first[m.station_id] = (m.lat, m.lon)
            seen[m.station_id] = set()
        elif m.station_id not in drifted:
            if haversine_km(first[m.station_id], (m.lat, m.lon)) * 1000.0 > STATION_DRIFT_M:
                drifted.add(m.station_id)
                log.warning("station %s moved more than %.0f m; keeping first position", m.station_id, STATION_DRIFT_M)
        seen[m.station_id].add(m.pollutant)
    if not first:
        raise EmptyInput("no measurements to build stations from")
    return [
        SensorStation(sid, *first[sid], frozenset(seen[sid]), sid in drifted)
        for sid in sorted(first)
    ]
