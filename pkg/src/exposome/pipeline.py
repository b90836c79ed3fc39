"""End-to-end analysis: track + measurements + profile -> ExposureReport."""

from __future__ import annotations

from .activity import DEFAULT_MAX_GAP_S, segmentize
from .airquality import build_station_table
from .cigarettes import cigarettes, default_table
from .dose import DoseConfig, integrate
from .errors import EmptyInput
from .geo import StationIndex
from .physio import RateSource, ventilation_series
from .report import build_report


def build_index(measurements) -> StationIndex:
    try:
        stations = build_station_table(measurements)
    except EmptyInput:
        return StationIndex.build([], [])
    return StationIndex.build(stations, measurements)


def analyze(track, profile, index, table=None, config=None, max_gap_s=DEFAULT_MAX_GAP_S, tv_scale=None):
    table = table or default_table()
    config = config or DoseConfig()
    segments = segmentize(track, max_gap_s)
    vent = ventilation_series(track, profile, tv_scale)
    exposures, totals = integrate(segments, vent, index, config, elapsed_s=track.elapsed_s)
    return build_report(
        activity_id=track.activity_id,
        profile=profile,
        exposures=exposures,
        totals=totals,
        cigs=cigarettes(totals, table),
        table=table,
        config=config,
        rest_points=sum(1 for v in vent if v.source is RateSource.REST),
        max_gap_s=max_gap_s,
        extra={"sport": track.sport.value, "start": track.start, "points": len(track.points)},
    )
