"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 ran but no pollutant coverage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .activity import load_activity
from .airquality import Pollutant, load_measurements
from .config import AppConfig
from .errors import ConfigError, ExposomeError
from .physio import PhysioProfile
from .pipeline import analyze, build_index
from .report import aggregate_report, canonical_json, dump_geojson, to_geojson, write_report
from .route import Mode, PlannedRoute, decode_polyline, forecast

log = logging.getLogger("exposome")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_COVERAGE = 2

ACTIVITY_SUFFIXES = (".gpx", ".json")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def write_atomic(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(data: bytes, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(data.decode())
    else:
        write_atomic(path, data)


def _pollutant(text: str) -> Pollutant:
    p = Pollutant.from_parameter(text)
    if p is None:
        raise argparse.ArgumentTypeError(f"unknown pollutant {text!r}; choose from {', '.join(x.value.lower() for x in Pollutant)}")
    return p


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--aq", required=True, metavar="FILE", help="measurements: OpenAQ-style JSON or CSV")
    p.add_argument("--profile", metavar="FILE", default=None,
                   help="physiology profile JSON (required unless the config names one)")
    p.add_argument("--config", metavar="FILE", default=None, help="app config JSON (unknown keys rejected)")
    p.add_argument("--pollutant", type=_pollutant, default="pm25", metavar="NAME",
                   help="pollutant drawn in the GeoJSON map")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="exposome", description="Inhaled pollutant dose for GPS activities and planned routes.",
                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("analyze", help="dose report for one recorded activity", formatter_class=fmt,
                       description="Join one activity to the nearest sensors and report dose and cigarette equivalents.")
    p.add_argument("--activity", required=True, metavar="FILE", help="GPX or Strava streams JSON")
    _common(p)
    p.add_argument("--out", metavar="FILE", default=None, help="report path; stdout when omitted")
    p.add_argument("--geojson", metavar="FILE", default=None, help="write a GeoJSON exposure map here")
    p.set_defaults(func=cmd_analyze, parser=p)

    p = sub.add_parser("batch", help="reports for every activity in a folder plus an aggregate", formatter_class=fmt,
                       description="Analyze every .gpx/.json activity in a folder (sorted by name).")
    p.add_argument("--dir", required=True, metavar="DIR", help="folder of activity files")
    _common(p)
    p.add_argument("--out-dir", metavar="DIR", default="reports", help="where per-activity and aggregate reports go")
    p.add_argument("--jobs", type=int, default=1, help="activities analyzed concurrently")
    p.set_defaults(func=cmd_batch, parser=p)

    p = sub.add_parser("route", help="forecast exposure for a planned route", formatter_class=fmt,
                       description="Forecast dose along a planned route at a mode's fixed speed and effort.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--polyline", metavar="STR", help="encoded polyline of the route")
    src.add_argument("--points", metavar="FILE", help="JSON list of [lat, lon] or route JSON {points|polyline, mode, departure}")
    p.add_argument("--precision", type=int, choices=(5, 6), default=5, help="polyline precision")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None,
                   help="transport mode (required unless given in route JSON)")
    p.add_argument("--depart", metavar="UTC", default=None,
                   help="departure instant, ISO-8601 (required unless given in route JSON)")
    _common(p)
    p.add_argument("--out", metavar="FILE", default=None, help="report path; stdout when omitted")
    p.add_argument("--geojson", metavar="FILE", default=None, help="write a GeoJSON exposure map here")
    p.set_defaults(func=cmd_route, parser=p)
    return parser


def _load_shared(args):
    cfg = AppConfig.load(args.config) if args.config else AppConfig()
    if not (args.profile or cfg.profile):
        args.parser.error("the following arguments are required: --profile")
    profile = PhysioProfile.load(args.profile or cfg.profile)
    measurements = load_measurements(args.aq)
    if measurements.dropped:
        log.info("%s: dropped %s", args.aq, dict(measurements.dropped))
    return cfg, profile, build_index(measurements)


def _finish(report, args, cfg) -> int:
    _emit(write_report(report), args.out or cfg.out)
    geo_path = args.geojson or cfg.geojson
    if geo_path:
        write_atomic(geo_path, dump_geojson(to_geojson(report.exposures, args.pollutant, cfg.band_scale())))
    return EXIT_NO_COVERAGE if report.no_coverage else EXIT_OK


def cmd_analyze(args) -> int:
    cfg, profile, index = _load_shared(args)
    track = load_activity(args.activity)
    report = analyze(track, profile, index, cfg.table(), cfg.dose_config(), cfg.max_gap_s)
    return _finish(report, args, cfg)


def cmd_route(args) -> int:
    cfg, profile, index = _load_shared(args)
    plan: dict = {}
    if args.points:
        obj = json.loads(Path(args.points).read_text())
        plan = obj if isinstance(obj, dict) else {"points": obj}
    else:
        plan = {"points": decode_polyline(args.polyline, args.precision)}
    if args.mode:
        plan["mode"] = args.mode
    if args.depart:
        plan["departure"] = args.depart
    missing = [k for k in ("mode", "departure") if k not in plan]
    if missing:
        raise ConfigError(f"route needs {' and '.join('--' + ('depart' if k == 'departure' else k) for k in missing)}")
    route = PlannedRoute.from_dict(plan, args.precision)
    report = forecast(route, profile, index, cfg.table(), cfg.mode_profiles(), cfg.dose_config())
    return _finish(report, args, cfg)


def cmd_batch(args) -> int:
    folder = Path(args.dir)
    if not folder.is_dir():
        raise ConfigError(f"{folder} is not a directory")
    files = sorted(f for f in folder.iterdir() if f.is_file() and f.suffix.lower() in ACTIVITY_SUFFIXES)
    if not files:
        raise ConfigError(f"no activity files in {folder}")
    cfg, profile, index = _load_shared(args)
    table, dose_cfg = cfg.table(), cfg.dose_config()
    out_dir = Path(args.out_dir)

    def one(path):
        try:
            report = analyze(load_activity(path), profile, index, table, dose_cfg, cfg.max_gap_s)
        except (ExposomeError, OSError, ValueError) as exc:
            log.error("%s: %s", path.name, exc)
            return path, None, str(exc)
        write_atomic(out_dir / f"{path.stem}.report.json", write_report(report))
        return path, report, None

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(one, files))  # map preserves the sorted order

    reports = [r for _, r, _ in results if r is not None]
    failures = [{"file": p.name, "error": e} for p, r, e in results if r is None]
    if failures:
        print(f"exposome: {len(failures)} of {len(files)} activities failed", file=sys.stderr)
    if not reports:
        return EXIT_INPUT
    write_atomic(out_dir / "aggregate.json", canonical_json(aggregate_report(reports, failures)))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ExposomeError, OSError, ValueError) as exc:
        print(f"exposome: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
