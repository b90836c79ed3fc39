import math
import random
from concurrent.futures import ThreadPoolExecutor
from datetime import timedelta

import pytest

from exposome.airquality import Measurement, Pollutant, SensorStation, build_station_table
from exposome.errors import UnknownStation
from exposome.geo import JoinResult, NoMatch, NoMatchReason, StationIndex, haversine_km
from tests.conftest import T0
from tests.oracles import brute_force_query


def test_haversine_identity():
    assert haversine_km((0, 0), (0, 0)) == 0.0
    assert haversine_km((33.6, -117.8), (33.6, -117.8)) == 0.0


def test_haversine_one_degree():
    # R × π/180 with R = 6371.0088 km
    assert haversine_km((0, 0), (0, 1)) == pytest.approx(111.19508, rel=1e-7)


def test_haversine_symmetric_exact():
    rng = random.Random(1)
    for _ in range(1000):
        a = (rng.uniform(-90, 90), rng.uniform(-180, 180))
        b = (rng.uniform(-90, 90), rng.uniform(-180, 180))
        assert haversine_km(a, b) == haversine_km(b, a)


def test_haversine_triangle_inequality():
    rng = random.Random(2)
    for _ in range(1000):
        a, b, c = [(rng.uniform(-90, 90), rng.uniform(-180, 180)) for _ in range(3)]
        assert haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-9


def _m(sid, lat, lon, minutes, value=1.0, pollutant=Pollutant.PM25):
    return Measurement(sid, pollutant, value, T0 + timedelta(minutes=minutes), lat, lon)


def _index(ms):
    return StationIndex.build(build_station_table(ms), ms)


def test_empty_index_no_station():
    idx = StationIndex.build([], [])
    r = idx.query(0, 0, T0.timestamp(), Pollutant.PM25)
    assert r == NoMatch(NoMatchReason.NO_STATION)


def test_singleton_always_returned():
    idx = _index([_m("only", 10, 10, 0)])
    rng = random.Random(3)
    for _ in range(50):
        r = idx.query(rng.uniform(-90, 90), rng.uniform(-180, 180), T0.timestamp(), Pollutant.PM25,
                      max_distance_km=math.inf)
        assert isinstance(r, JoinResult) and r.station_id == "only"


def test_exact_hit():
    ms = [_m("A", 33.6, -117.8, 0, 5.0), _m("A", 33.6, -117.8, 60, 6.0)]
    r = _index(ms).query(33.6, -117.8, (T0 + timedelta(minutes=60)).timestamp(), Pollutant.PM25)
    assert r.distance_km == 0.0 and r.time_offset_s == 0.0 and r.measurement.value == 6.0


def test_distance_beats_recency():
    # near station is 1 km away with an 80-minute-old reading; far one is 5 km with a fresh reading
    near_lat = 33.6 + 1.0 / 111.19508
    far_lat = 33.6 + 5.0 / 111.19508
    ms = [_m("near", near_lat, -117.8, -80), _m("far", far_lat, -117.8, 0)]
    r = _index(ms).query(33.6, -117.8, T0.timestamp(), Pollutant.PM25)
    assert r.station_id == "near"
    assert r.distance_km == pytest.approx(1.0, rel=1e-6)


def test_time_tie_prefers_later():
    ms = [_m("A", 0, 0, -10, 1.0), _m("A", 0, 0, 10, 2.0)]
    r = _index(ms).query(0, 0, T0.timestamp(), Pollutant.PM25)
    assert r.measurement.value == 2.0


def test_same_instant_latest_ingested_wins():
    ms = [_m("A", 0, 0, 0, 1.0), _m("A", 0, 0, 0, 9.0)]
    r = _index(ms).query(0, 0, T0.timestamp(), Pollutant.PM25)
    assert r.measurement.value == 9.0


def test_no_match_reasons():
    idx = _index([_m("A", 0, 0, 0)])
    assert idx.query(0, 0, T0.timestamp(), Pollutant.CO).reason is NoMatchReason.NO_STATION
    assert idx.query(10, 10, T0.timestamp(), Pollutant.PM25).reason is NoMatchReason.TOO_FAR
    late = (T0 + timedelta(hours=3)).timestamp()
    assert idx.query(0, 0, late, Pollutant.PM25).reason is NoMatchReason.NO_TIMELY_MEASUREMENT


def test_untimely_near_station_skipped_for_timely_far_one():
    ms = [_m("near", 0, 0, -200), _m("far", 0, 0.2, 0)]
    r = _index(ms).query(0, 0, T0.timestamp(), Pollutant.PM25)
    assert r.station_id == "far"


def test_unknown_station():
    st = [SensorStation("A", 0, 0, frozenset({Pollutant.PM25}))]
    with pytest.raises(UnknownStation):
        StationIndex.build(st, [_m("B", 0, 0, 0)])


def _random_world(rng, n_stations, clustered=True):
    ms = []
    for i in range(n_stations):
        if clustered:
            lat, lon = rng.uniform(33.0, 35.0), rng.uniform(-119.0, -117.0)
        else:
            lat, lon = rng.uniform(-89, 89), rng.uniform(-180, 180)
        pols = rng.sample([Pollutant.PM25, Pollutant.CO, Pollutant.NO2], rng.randint(1, 3))
        for p in pols:
            for _ in range(rng.randint(1, 4)):
                ms.append(_m(f"s{i:04d}", lat, lon, rng.randint(-300, 300), rng.uniform(0, 50), p))
    return ms


@pytest.mark.parametrize("clustered", [True, False])
def test_matches_brute_force(clustered):
    rng = random.Random(7 if clustered else 8)
    ms = _random_world(rng, 500)
    stations = build_station_table(ms)
    idx = StationIndex.build(stations, ms)
    for _ in range(500):
        if clustered:
            lat, lon = rng.uniform(32.5, 35.5), rng.uniform(-119.5, -116.5)
        else:
            lat, lon = rng.uniform(-90, 90), rng.uniform(-180, 180)
        t = (T0 + timedelta(minutes=rng.uniform(-400, 400))).timestamp()
        p = rng.choice([Pollutant.PM25, Pollutant.CO, Pollutant.NO2])
        max_dt = rng.choice([600, 5400, 20000])
        max_km = rng.choice([5, 50, 2000]) if clustered else rng.choice([500, 3000, math.inf])
        got = idx.query(lat, lon, t, p, max_dt, max_km)
        want = brute_force_query(stations, ms, lat, lon, t, p, max_dt, max_km, haversine_km)
        if want is None:
            assert isinstance(got, NoMatch)
        else:
            (d, off, _, sid), m = want
            assert (got.station_id, got.distance_km, got.time_offset_s, got.measurement) == (sid, d, off, m)


def test_enlarging_windows_never_loses_a_match():
    rng = random.Random(11)
    ms = _random_world(rng, 200)
    idx = _index(ms)
    for _ in range(300):
        lat, lon = rng.uniform(32.5, 35.5), rng.uniform(-119.5, -116.5)
        t = (T0 + timedelta(minutes=rng.uniform(-400, 400))).timestamp()
        small = idx.query(lat, lon, t, Pollutant.PM25, 900, 10)
        if small.matched:
            assert idx.query(lat, lon, t, Pollutant.PM25, 1800, 10).matched
            assert idx.query(lat, lon, t, Pollutant.PM25, 900, 40).matched


def test_concurrent_queries_match_serial():
    rng = random.Random(5)
    ms = _random_world(rng, 300)
    idx = _index(ms)
    qs = [(rng.uniform(33, 35), rng.uniform(-119, -117), (T0 + timedelta(minutes=rng.uniform(-300, 300))).timestamp())
          for _ in range(400)]
    serial = [idx.query(a, b, t, Pollutant.CO) for a, b, t in qs]
    with ThreadPoolExecutor(8) as pool:
        parallel = list(pool.map(lambda q: idx.query(q[0], q[1], q[2], Pollutant.CO), qs))
    assert parallel == serial
