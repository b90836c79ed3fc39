from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from exposome.activity import ActivityTrack, Sport, TrackPoint
from exposome.airquality import Measurement, Pollutant
from exposome.physio import PhysioProfile
from exposome.pipeline import build_index

FIXTURES = Path(__file__).parent / "fixtures"
T0 = datetime(2019, 6, 1, 15, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def male70():
    # age 40 -> hr_max 180, so hr 120 sits at half the heart-rate reserve
    return PhysioProfile(sex="male", height_in=70, age_y=40)


def make_track(n=61, step_s=60, hr=120.0, lat0=33.64, lon0=-117.84, dlat=0.0008, dlon=0.0005, **kw):
    points = tuple(
        TrackPoint(T0 + timedelta(seconds=step_s * i), lat0 + dlat * i, lon0 + dlon * i, heart_rate_bpm=hr, **kw)
        for i in range(n)
    )
    return ActivityTrack("synthetic", Sport.RIDE, points)


def uniform_field(value=10.0, pollutant=Pollutant.PM25, lat=33.66, lon=-117.83, hours=range(-3, 5)):
    """One station whose reading never changes: a spatially and temporally uniform field."""
    return [Measurement("U", pollutant, value, T0 + timedelta(hours=h), lat, lon) for h in hours]


@pytest.fixture
def uniform_index():
    return build_index(uniform_field())
