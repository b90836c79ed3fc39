import json
import math
import shutil

import pytest

from exposome.cli import build_parser, main
from exposome.geo import EARTH_RADIUS_KM, haversine_km
from exposome.route import decode_polyline, encode_polyline
from tests.oracles import lint_geojson


@pytest.fixture
def args(fixtures):
    return ["--aq", str(fixtures / "aq_uniform_pm25.json"), "--profile", str(fixtures / "profile_male70.json")]


def test_analyze_fixture(tmp_path, fixtures, args):
    out, geo = tmp_path / "r.json", tmp_path / "m.geojson"
    code = main(["analyze", "--activity", str(fixtures / "constant_ride.gpx"), *args,
                 "--out", str(out), "--geojson", str(geo)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["doses"]["PM25"]["total_ug"] == pytest.approx(14.9796, rel=1e-9)
    assert rep["cigarettes"]["total"] == pytest.approx(0.74898, rel=1e-9)
    assert lint_geojson(json.loads(geo.read_text())) == []


def test_analyze_stdout(fixtures, args, capsys):
    assert main(["analyze", "--activity", str(fixtures / "constant_ride.gpx"), *args]) == 0
    assert json.loads(capsys.readouterr().out)["schema"] == "exposome.report/1"


def test_byte_identical_runs(tmp_path, fixtures, args):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        main(["analyze", "--activity", str(fixtures / "constant_ride.gpx"), *args, "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_missing_profile_exits_1(fixtures, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--activity", str(fixtures / "constant_ride.gpx"), "--aq", str(fixtures / "aq_uniform_pm25.json")])
    assert exc.value.code == 1
    assert "--profile" in capsys.readouterr().err


def test_unknown_flag_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--bogus"])
    assert exc.value.code == 1


def test_no_station_in_range_exits_2(tmp_path, fixtures):
    out = tmp_path / "r.json"
    code = main(["analyze", "--activity", str(fixtures / "constant_ride.gpx"), "--aq", str(fixtures / "aq_far.json"),
                 "--profile", str(fixtures / "profile_male70.json"), "--out", str(out)])
    assert code == 2
    rep = json.loads(out.read_text())
    assert rep["warnings"][0]["code"] == "no_coverage"


def test_missing_activity_file_exits_1(tmp_path, args, capsys):
    assert main(["analyze", "--activity", str(tmp_path / "nope.gpx"), *args]) == 1
    assert "error" in capsys.readouterr().err


def test_config_unknown_key(tmp_path, fixtures, args):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"max_distnce_km": 10}))
    assert main(["analyze", "--activity", str(fixtures / "constant_ride.gpx"), *args, "--config", str(cfg)]) == 1


def test_config_supplies_profile(tmp_path, fixtures):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profile": str(fixtures / "profile_male70.json"), "pollutants": ["pm25"]}))
    out = tmp_path / "r.json"
    code = main(["analyze", "--activity", str(fixtures / "constant_ride.gpx"), "--aq", str(fixtures / "aq_uniform_pm25.json"),
                 "--config", str(cfg), "--out", str(out)])
    assert code == 0
    assert set(json.loads(out.read_text())["doses"]) == {"PM25"}


def test_batch_three_copies(tmp_path, fixtures, args):
    acts = tmp_path / "acts"
    acts.mkdir()
    for name in ("a", "b", "c"):
        shutil.copy(fixtures / "constant_ride.gpx", acts / f"{name}.gpx")
    out_dir = tmp_path / "out"
    assert main(["batch", "--dir", str(acts), *args, "--out-dir", str(out_dir), "--jobs", "2"]) == 0
    single = json.loads((out_dir / "a.report.json").read_text())
    agg = json.loads((out_dir / "aggregate.json").read_text())
    assert agg["activities"] == ["a", "b", "c"]
    assert agg["doses"]["PM25"]["total_ug"] == pytest.approx(3 * single["doses"]["PM25"]["total_ug"], rel=1e-12)
    assert sorted(p.name for p in out_dir.iterdir()) == ["a.report.json", "aggregate.json", "b.report.json", "c.report.json"]


def test_batch_one_bad_one_good(tmp_path, fixtures, args, capsys):
    acts = tmp_path / "acts"
    acts.mkdir()
    shutil.copy(fixtures / "constant_ride.gpx", acts / "good.gpx")
    (acts / "bad.gpx").write_text("<gpx><trk></trk></gpx>")
    out_dir = tmp_path / "out"
    assert main(["batch", "--dir", str(acts), *args, "--out-dir", str(out_dir)]) == 0
    agg = json.loads((out_dir / "aggregate.json").read_text())
    assert agg["activities"] == ["good"]
    assert [f["file"] for f in agg["failures"]] == ["bad.gpx"]
    assert "1 of 2" in capsys.readouterr().err


def test_batch_empty_folder(tmp_path, args):
    (tmp_path / "empty").mkdir()
    assert main(["batch", "--dir", str(tmp_path / "empty"), *args, "--out-dir", str(tmp_path / "o")]) == 1


def _meridian(n, leg_s, speed_kmh, lat0=33.60, lon=-117.84):
    step = math.degrees(speed_kmh * leg_s / 3600.0 / EARTH_RADIUS_KM)
    return [(lat0 + i * step, lon) for i in range(n + 1)]


def test_route_closed_form(tmp_path, fixtures, args):
    pts = _meridian(4, 120, 20.0)
    out = tmp_path / "r.json"
    poly = encode_polyline(pts)
    code = main(["route", "--polyline", poly, "--mode", "cycle", "--depart", "2019-06-01T15:00:00Z",
                 *args, "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["forecast"] is True
    # the polyline carries 5 decimals, so the closed form uses the decoded length
    dec = decode_polyline(poly)
    length = math.fsum(haversine_km(a, b) for a, b in zip(dec, dec[1:]))
    expected = 10.0 * (12 + 0.6 * 33) * 0.876 / 1000 * (length / 20.0 * 60)
    assert rep["doses"]["PM25"]["total_ug"] == pytest.approx(expected, rel=1e-5)


def test_route_points_file(tmp_path, fixtures, args, capsys):
    route_file = tmp_path / "route.json"
    route_file.write_text(json.dumps({"points": _meridian(2, 60, 5.0), "mode": "walk", "departure": "2019-06-01T16:00:00Z"}))
    assert main(["route", "--points", str(route_file), *args]) == 0
    assert json.loads(capsys.readouterr().out)["route"]["mode"] == "walk"


def test_route_unknown_mode(args, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["route", "--polyline", "_p~iF~ps|U", "--mode", "teleport", "--depart", "2019-06-01T15:00:00Z", *args])
    assert exc.value.code == 1
    err = capsys.readouterr().err
    for m in ("walk", "run", "cycle", "drive"):
        assert m in err


def test_route_departure_outside_window(tmp_path, args):
    poly = encode_polyline(_meridian(3, 60, 20.0))
    code = main(["route", "--polyline", poly, "--mode", "cycle", "--depart", "2019-06-05T15:00:00Z",
                 *args, "--out", str(tmp_path / "r.json")])
    assert code == 2


def test_route_requires_departure(args):
    assert main(["route", "--polyline", encode_polyline(_meridian(2, 60, 20.0)), "--mode", "walk", *args]) == 1


def test_route_malformed_polyline(args):
    assert main(["route", "--polyline", "_p~iF~ps|U_", "--mode", "walk", "--depart", "2019-06-01T15:00:00Z", *args]) == 1


@pytest.mark.parametrize("command", ["analyze", "batch", "route"])
def test_help_documents_every_flag(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[command]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
        if action.option_strings:
            assert action.help


def test_top_level_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert all(c in out for c in ("analyze", "batch", "route"))
