"""Inhaled mass per pollutant, integrated over an activity's segments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Optional, Sequence

from .airquality import COLLECTED
from .geo import DEFAULT_MAX_DISTANCE_KM, DEFAULT_MAX_TIME_OFFSET_S, NoMatch, StationIndex
from .timeutil import to_epoch


@dataclass(frozen=True)
class DoseConfig:
    pollutants: tuple = COLLECTED
    max_time_offset_s: float = DEFAULT_MAX_TIME_OFFSET_S
    max_distance_km: float = DEFAULT_MAX_DISTANCE_KM


def segment_dose_ug(concentration_ug_m3: float, ventilation_l_min: float, duration_s: float) -> float:
    """µg/m³ × (L/min ÷ 1000 → m³/min) × (s ÷ 60 → min)."""
    if concentration_ug_m3 < 0 or ventilation_l_min < 0 or duration_s < 0:
        raise ValueError("dose inputs must be non-negative")
    return concentration_ug_m3 * (ventilation_l_min / 1000.0) * (duration_s / 60.0)


@dataclass(frozen=True)
class PollutantExposure:
    """Exposure of one segment to one pollutant; unmatched carries the miss reason."""

    dose_ug: float
    concentration_ug_m3: Optional[float] = None
    station_id: Optional[str] = None
    distance_km: Optional[float] = None
    time_offset_s: Optional[float] = None
    no_match: Optional[str] = None

    @property
    def matched(self) -> bool:
        return self.no_match is None


@dataclass(frozen=True)
class ExposureSegment:
    segment: object  # activity.Segment
    ventilation_l_min: float
    exposures: dict  # Pollutant -> PollutantExposure


@dataclass(frozen=True)
class DoseTotals:
    total_ug: dict  # Pollutant -> float
    matched_s: dict  # Pollutant -> float
    duration_s: float  # elapsed time, including gaps
    gap_s: float = 0.0

    def coverage(self, pollutant) -> float:
        if self.duration_s <= 0:
            return 0.0
        return self.matched_s.get(pollutant, 0.0) / self.duration_s

    @property
    def coverage_fraction(self) -> dict:
        return {p: self.coverage(p) for p in self.total_ug}

    def unmatched_s(self, pollutant) -> float:
        return self.duration_s - self.gap_s - self.matched_s.get(pollutant, 0.0)

    @property
    def no_coverage(self) -> bool:
        return all(v == 0.0 for v in self.matched_s.values())

    def scaled(self, k: float) -> "DoseTotals":
        return DoseTotals({p: v * k for p, v in self.total_ug.items()}, dict(self.matched_s), self.duration_s, self.gap_s)


def segment_ventilation(segment, samples: Sequence) -> float:
    """Mean of the endpoint samples, held constant across the segment."""
    a, b = samples[segment.index], samples[segment.index + 1]
    return (a.ventilation_l_min + b.ventilation_l_min) / 2.0


def integrate(
    segments: Sequence,
    ventilation: Sequence,
    index: StationIndex,
    config: DoseConfig = DoseConfig(),
    elapsed_s: Optional[float] = None,
    query_time: Optional[datetime] = None,
) -> tuple[list[ExposureSegment], DoseTotals]:
    """Join each segment to the nearest timely station per pollutant and sum doses.

    ``query_time`` pins every lookup to one instant (route forecasts);
    by default each segment is looked up at its midpoint time.
    ``elapsed_s`` defaults to the sum of segment durations; the difference
    is reported as gap time.
    """
    pinned = to_epoch(query_time) if query_time is not None else None
    out = []
    doses: dict = {p: [] for p in config.pollutants}
    matched: dict = {p: [] for p in config.pollutants}
    for seg in segments:
        vent = segment_ventilation(seg, ventilation)
        t = pinned if pinned is not None else to_epoch(seg.t_mid)
        exposures = {}
        for p in config.pollutants:
            hit = index.query(seg.lat, seg.lon, t, p, config.max_time_offset_s, config.max_distance_km)
            if isinstance(hit, NoMatch):
                exposures[p] = PollutantExposure(0.0, no_match=hit.reason.value)
                continue
            c = hit.measurement.value
            d = segment_dose_ug(c, vent, seg.duration_s)
            exposures[p] = PollutantExposure(d, c, hit.station_id, hit.distance_km, hit.time_offset_s)
            doses[p].append(d)
            matched[p].append(seg.duration_s)
        out.append(ExposureSegment(seg, vent, exposures))

    kept = math.fsum(s.duration_s for s in segments)
    elapsed = kept if elapsed_s is None else float(elapsed_s)
    totals = DoseTotals(
        total_ug={p: math.fsum(doses[p]) for p in config.pollutants},
        matched_s={p: math.fsum(matched[p]) for p in config.pollutants},
        duration_s=elapsed,
        gap_s=elapsed - kept,
    )
    return out, totals


def sum_totals(items: Sequence[DoseTotals]) -> DoseTotals:
    """Aggregate several activities; fsum keeps n identical inputs at exactly n×."""
    pollutants = []
    for t in items:
        pollutants.extend(p for p in t.total_ug if p not in pollutants)
    return DoseTotals(
        total_ug={p: math.fsum(t.total_ug.get(p, 0.0) for t in items) for p in pollutants},
        matched_s={p: math.fsum(t.matched_s.get(p, 0.0) for t in items) for p in pollutants},
        duration_s=math.fsum(t.duration_s for t in items),
        gap_s=math.fsum(t.gap_s for t in items),
    )
