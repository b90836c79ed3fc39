"""Exposure reports (canonical JSON, schema v1) and GeoJSON exposure maps."""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Sequence

from .airquality import Pollutant, ppm_factor
from .errors import ConfigError, SerializationFailure
from .timeutil import format_utc

REPORT_SCHEMA = "exposome.report/1"
AGGREGATE_SCHEMA = "exposome.aggregate/1"
SIGNIFICANT_DIGITS = 6

BAND_LABELS = ("low", "moderate", "high", "very_high")
NO_DATA = "no_data"
UNBANDED = "unbanded"


def _gas(ppm_breaks, pollutant):
    f = ppm_factor(pollutant)
    return tuple(b * f for b in ppm_breaks)


@dataclass(frozen=True)
class BandScale:
    """Per-pollutant breakpoints (µg/m³) splitting [0, ∞) into BAND_LABELS."""

    breakpoints: dict  # Pollutant -> tuple of 3 ascending floats

    def __post_init__(self):
        for p, bps in self.breakpoints.items():
            if len(bps) != len(BAND_LABELS) - 1:
                raise ConfigError(f"{p.value}: need {len(BAND_LABELS) - 1} breakpoints, got {len(bps)}")
            if any(not a < b for a, b in zip((0.0,) + tuple(bps), bps)):
                raise ConfigError(f"{p.value}: breakpoints must be positive and strictly increasing")

    def band(self, pollutant, concentration: Optional[float]) -> str:
        if concentration is None:
            return NO_DATA
        bps = self.breakpoints.get(pollutant)
        if bps is None:
            return UNBANDED
        return BAND_LABELS[bisect_right(bps, concentration)]

    @classmethod
    def from_dict(cls, obj: dict) -> "BandScale":
        merged = dict(DEFAULT_BANDS.breakpoints)
        for name, bps in obj.items():
            p = Pollutant.from_parameter(name)
            if p is None:
                raise ConfigError(f"unknown pollutant {name!r} in band scale")
            merged[p] = tuple(float(b) for b in bps)
        return cls(merged)


# US EPA AQI category edges (good/moderate/USG/unhealthy-and-above); gases converted at 25 °C
DEFAULT_BANDS = BandScale(
    {
        Pollutant.PM25: (12.0, 35.5, 55.5),
        Pollutant.PM10: (55.0, 155.0, 255.0),
        Pollutant.CO: _gas((4.5, 9.5, 12.5), Pollutant.CO),
        Pollutant.O3: _gas((0.055, 0.071, 0.086), Pollutant.O3),
        Pollutant.NO2: _gas((0.054, 0.101, 0.361), Pollutant.NO2),
        Pollutant.SO2: _gas((0.036, 0.076, 0.186), Pollutant.SO2),
    }
)


@dataclass
class ExposureReport:
    activity_id: str
    profile: dict
    totals: object  # dose.DoseTotals
    cigarettes: object  # cigarettes.CigaretteReport
    exposures: list  # dose.ExposureSegment
    config: dict
    forecast: bool = False
    extra: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def no_coverage(self) -> bool:
        return self.totals.no_coverage

    def to_dict(self) -> dict:
        totals = self.totals
        doses = {
            p.value: {
                "total_ug": totals.total_ug[p],
                "coverage": totals.coverage(p),
                "matched_s": totals.matched_s[p],
                "unmatched_s": totals.unmatched_s(p),
            }
            for p in totals.total_ug
        }
        cig = self.cigarettes
        out = {
            "schema": REPORT_SCHEMA,
            "activity_id": self.activity_id,
            "forecast": self.forecast,
            "profile": self.profile,
            "duration_s": totals.duration_s,
            "gap_s": totals.gap_s,
            "doses": doses,
            "cigarettes": {
                "total": cig.total,
                "per_pollutant": {p.value: v for p, v in cig.per_pollutant.items()},
                "uncovered": [p.value for p in cig.uncovered],
            },
            "segments": [_segment_dict(e) for e in self.exposures],
            "config": self.config,
            "warnings": self.warnings,
        }
        if self.extra:
            out["route" if self.forecast else "extra"] = self.extra
        return out


def _segment_dict(e) -> dict:
    seg = e.segment
    pollutants = {}
    for p, x in e.exposures.items():
        if x.matched:
            pollutants[p.value] = {
                "concentration_ug_m3": x.concentration_ug_m3,
                "dose_ug": x.dose_ug,
                "station_id": x.station_id,
                "distance_km": x.distance_km,
                "time_offset_s": x.time_offset_s,
            }
        else:
            pollutants[p.value] = {"dose_ug": 0.0, "no_match": x.no_match}
    return {
        "index": seg.index,
        "start": list(seg.start),
        "end": list(seg.end),
        "t_mid": seg.t_mid,
        "duration_s": seg.duration_s,
        "ventilation_l_min": e.ventilation_l_min,
        "pollutants": pollutants,
    }


def build_report(activity_id, profile, exposures, totals, cigs, table, config, forecast=False,
                 extra=None, rest_points: int = 0, max_gap_s=None) -> ExposureReport:
    from .physio import tidal_volume_l

    prof = profile.to_dict()
    prof["tidal_volume_l"] = tidal_volume_l(profile)
    cfg = {
        "pollutants": [p.value for p in config.pollutants],
        "max_distance_km": config.max_distance_km,
        "max_time_offset_s": config.max_time_offset_s,
        "equivalence": table.to_dict(),
        "ventilation_model": {
            "br_rest": profile.br_rest,
            "br_max": profile.br_max,
            "hr_rest_bpm": profile.hr_rest_bpm,
            "hr_max_bpm": profile.hr_max_bpm,
            "ftp_w": profile.ftp_w,
        },
    }
    if max_gap_s is not None:
        cfg["max_gap_s"] = max_gap_s

    warnings = []
    if totals.no_coverage:
        warnings.append({"code": "no_coverage",
                         "detail": "no pollutant measurement matched any part of the activity; doses are zero"})
    else:
        for p in totals.total_ug:
            if totals.matched_s[p] == 0.0:
                warnings.append({"code": "pollutant_unmatched", "detail": p.value})
    for p in cigs.uncovered:
        warnings.append({"code": "no_equivalence", "detail": p.value})
    if rest_points:
        warnings.append({"code": "rest_fallback",
                         "detail": f"{rest_points} point(s) had neither heart rate nor power; resting breathing rate used"})
    return ExposureReport(activity_id, prof, totals, cigs, list(exposures), cfg, forecast, dict(extra or {}), warnings)


def _canonical(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise SerializationFailure(f"non-finite number {obj!r} in report")
        return float(f"{obj:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(obj, datetime):
        return format_utc(obj)
    if isinstance(obj, dict):
        return {str(getattr(k, "value", k)): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if hasattr(obj, "value"):  # enums
        return obj.value
    raise SerializationFailure(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> bytes:
    """Sorted keys, floats at 6 significant digits, trailing newline."""
    return (json.dumps(_canonical(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode()


def write_report(report) -> bytes:
    return canonical_json(report.to_dict() if isinstance(report, ExposureReport) else report)


def to_geojson(segments: Sequence, pollutant, scale: BandScale = DEFAULT_BANDS) -> dict:
    """One LineString feature per segment, coloured by band for ``pollutant``."""
    features = []
    for e in segments:
        seg = e.segment
        x = e.exposures.get(pollutant)
        matched = x is not None and x.matched
        conc = x.concentration_ug_m3 if matched else None
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[seg.start[1], seg.start[0]], [seg.end[1], seg.end[0]]],
                },
                "properties": {
                    "pollutant": pollutant.value,
                    "concentration_ug_m3": conc,
                    "band": scale.band(pollutant, conc),
                    "dose_ug": x.dose_ug if x is not None else 0.0,
                    "station_id": x.station_id if matched else None,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def dump_geojson(doc: dict) -> bytes:
    """Deterministic bytes; coordinates keep full precision."""
    try:
        return (json.dumps(doc, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n").encode()
    except ValueError as exc:
        raise SerializationFailure(str(exc)) from exc


def aggregate_report(reports: Sequence[ExposureReport], failures: Sequence[dict] = ()) -> dict:
    """Summed doses and cigarette equivalents over several activity reports."""
    from .dose import sum_totals

    totals = sum_totals([r.totals for r in reports])
    per_cig: dict = {}
    for r in reports:
        for p, v in r.cigarettes.per_pollutant.items():
            per_cig.setdefault(p, []).append(v)
    per_cig = {p: math.fsum(v) for p, v in per_cig.items()}
    return {
        "schema": AGGREGATE_SCHEMA,
        "activities": [r.activity_id for r in reports],
        "failures": list(failures),
        "duration_s": totals.duration_s,
        "doses": {p.value: {"total_ug": totals.total_ug[p], "coverage": totals.coverage(p)} for p in totals.total_ug},
        "cigarettes": {"total": math.fsum(per_cig.values()), "per_pollutant": {p.value: v for p, v in per_cig.items()}},
    }
