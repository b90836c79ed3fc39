"""Tidal volume, breathing rate and minute ventilation.

Tidal volume is the ideal-body-weight formula on height (inches) and sex:

    male:   (50 + 2.3 * (height - 60)) * 12 / 1000  litres
    female: (45 + 2.3 * (height - 60)) * 12 / 1000  litres

Breathing rate is a clamped linear ramp on effort fraction, where effort
comes from heart-rate reserve, or from power relative to FTP when heart
rate is missing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from datetime import datetime
from enum import Enum
from typing import Callable, Optional

from .errors import ConfigError, HeightOutOfDomain

POWER_SATURATION = 1.2


class Sex(str, Enum):
    MALE = "male"
    FEMALE = "female"


@dataclass(frozen=True)
class PhysioProfile:
    sex: Sex
    height_in: float
    age_y: float
    weight_kg: Optional[float] = None
    hr_rest_bpm: float = 60.0
    hr_max_bpm: Optional[float] = None  # None -> 220 - age
    br_rest: float = 12.0
    br_max: float = 45.0
    ftp_w: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "sex", Sex(self.sex))
        if self.hr_max_bpm is None:
            object.__setattr__(self, "hr_max_bpm", 220.0 - self.age_y)
        if self.height_in <= 36:
            raise ConfigError(f"height_in must exceed 36, got {self.height_in}")
        if not self.hr_rest_bpm < self.hr_max_bpm:
            raise ConfigError("hr_rest_bpm must be below hr_max_bpm")
        if not self.br_rest < self.br_max:
            raise ConfigError("br_rest must be below br_max")
        if self.ftp_w <= 0:
            raise ConfigError("ftp_w must be positive")

    @classmethod
    def from_dict(cls, obj: dict) -> "PhysioProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown profile keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**obj)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad profile: {exc}") from exc

    @classmethod
    def load(cls, path) -> "PhysioProfile":
        with open(path, "rb") as fh:
            try:
                obj = json.load(fh)
            except ValueError as exc:
                raise ConfigError(f"profile {path}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"profile {path}: expected a JSON object")
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sex"] = self.sex.value
        return d


def tidal_volume_l(profile: PhysioProfile) -> float:
    if profile.height_in < 60:
        raise HeightOutOfDomain(f"formula needs height >= 60 in, got {profile.height_in}")
    base = 50 if profile.sex is Sex.MALE else 45
    return ((base + 2.3 * (profile.height_in - 60)) * 12) / 1000


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def rate_from_effort(effort: float, profile: PhysioProfile) -> float:
    return profile.br_rest + _clamp(effort, 0.0, 1.0) * (profile.br_max - profile.br_rest)


def hr_effort(hr_bpm: float, profile: PhysioProfile) -> float:
    return _clamp((hr_bpm - profile.hr_rest_bpm) / (profile.hr_max_bpm - profile.hr_rest_bpm), 0.0, 1.0)


def power_effort(power_w: float, ftp_w: float) -> float:
    return _clamp(power_w / ftp_w, 0.0, POWER_SATURATION) / POWER_SATURATION


def breathing_rate(hr_bpm: float, profile: PhysioProfile) -> float:
    return rate_from_effort(hr_effort(hr_bpm, profile), profile)


def breathing_rate_from_power(power_w: float, profile: PhysioProfile, ftp_w: Optional[float] = None) -> float:
    return rate_from_effort(power_effort(power_w, ftp_w or profile.ftp_w), profile)


class RateSource(str, Enum):
    HEART_RATE = "hr"
    POWER = "power"
    REST = "rest"  # neither signal present


@dataclass(frozen=True)
class VentilationSample:
    timestamp: datetime
    breathing_rate: float
    tidal_volume_l: float
    ventilation_l_min: float
    source: RateSource = RateSource.HEART_RATE

    @classmethod
    def of(cls, timestamp, rate: float, tv: float, source=RateSource.HEART_RATE) -> "VentilationSample":
        return cls(timestamp, rate, tv, rate * tv, source)


def ventilation_series(
    track,
    profile: PhysioProfile,
    tv_scale: Optional[Callable[[float], float]] = None,
) -> list[VentilationSample]:
    """One ventilation sample per track point.

    ``tv_scale`` optionally maps effort fraction to a tidal-volume
    multiplier; without it tidal volume is constant for the activity.
    """
    tv = tidal_volume_l(profile)
    out = []
    for p in track.points:
        if p.heart_rate_bpm is not None:
            effort, source = hr_effort(p.heart_rate_bpm, profile), RateSource.HEART_RATE
        elif p.power_w is not None:
            effort, source = power_effort(p.power_w, profile.ftp_w), RateSource.POWER
        else:
            effort, source = 0.0, RateSource.REST
        rate = rate_from_effort(effort, profile)
        out.append(VentilationSample.of(p.timestamp, rate, tv * tv_scale(effort) if tv_scale else tv, source))
    return out
