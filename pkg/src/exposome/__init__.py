"""Inhaled air-pollution dose for GPS-tracked activities and planned routes."""

__version__ = "0.1.0"

from .activity import ActivityTrack, TrackPoint, parse_gpx, parse_strava_streams, segmentize
from .airquality import Measurement, Pollutant, SensorStation, build_station_table, convert_units, parse_openaq_json
from .cigarettes import EquivalenceTable, cigarettes, default_table
from .dose import DoseConfig, DoseTotals, integrate, segment_dose_ug
from .geo import JoinResult, NoMatch, StationIndex, haversine_km
from .physio import PhysioProfile, breathing_rate, breathing_rate_from_power, tidal_volume_l, ventilation_series
from .pipeline import analyze, build_index
from .report import BandScale, ExposureReport, to_geojson, write_report
from .route import Mode, ModeProfile, PlannedRoute, decode_polyline, encode_polyline, forecast

__all__ = [
    "ActivityTrack", "TrackPoint", "parse_gpx", "parse_strava_streams", "segmentize",
    "Measurement", "Pollutant", "SensorStation", "build_station_table", "convert_units", "parse_openaq_json",
    "EquivalenceTable", "cigarettes", "default_table",
    "DoseConfig", "DoseTotals", "integrate", "segment_dose_ug",
    "JoinResult", "NoMatch", "StationIndex", "haversine_km",
    "PhysioProfile", "breathing_rate", "breathing_rate_from_power", "tidal_volume_l", "ventilation_series",
    "analyze", "build_index",
    "BandScale", "ExposureReport", "to_geojson", "write_report",
    "Mode", "ModeProfile", "PlannedRoute", "decode_polyline", "encode_polyline", "forecast",
]
