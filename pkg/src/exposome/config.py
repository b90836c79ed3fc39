"""Application config loaded from ``--config`` JSON.

Every key is optional; unknown keys are an error so typos surface.

    {
      "profile": null,                 # path to profile JSON (CLI --profile wins)
      "v_day_m3": 11.0,                # reference daily inhaled volume
      "equivalence": {},               # {"PM25": 20.0, ...} µg per cigarette overrides
      "max_distance_km": 50.0,
      "max_time_offset_s": 5400,
      "max_gap_s": 60,
      "pollutants": ["CO", "NO2", "O3", "SO2", "PM25", "PM10"],
      "modes": {},                     # {"cycle": {"speed_kmh": 18, "effort_fraction": 0.5}}
      "bands": {},                     # {"PM25": [12, 35.5, 55.5]}
      "out": null,                     # default report path
      "geojson": null                  # default GeoJSON path
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Optional

from .activity import DEFAULT_MAX_GAP_S
from .airquality import COLLECTED, Pollutant
from .cigarettes import DEFAULT_V_DAY_M3, EquivalenceTable
from .dose import DoseConfig
from .errors import ConfigError
from .geo import DEFAULT_MAX_DISTANCE_KM, DEFAULT_MAX_TIME_OFFSET_S
from .report import BandScale
from .route import DEFAULT_MODES, ModeProfile, parse_mode


@dataclass
class AppConfig:
    profile: Optional[str] = None
    v_day_m3: float = DEFAULT_V_DAY_M3
    equivalence: dict = field(default_factory=dict)
    max_distance_km: float = DEFAULT_MAX_DISTANCE_KM
    max_time_offset_s: float = DEFAULT_MAX_TIME_OFFSET_S
    max_gap_s: float = DEFAULT_MAX_GAP_S
    pollutants: list = field(default_factory=lambda: [p.value for p in COLLECTED])
    modes: dict = field(default_factory=dict)
    bands: dict = field(default_factory=dict)
    out: Optional[str] = None
    geojson: Optional[str] = None

    @classmethod
    def from_dict(cls, obj: dict) -> "AppConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**obj)
        # resolve eagerly so bad values fail at load time
        cfg.dose_config()
        cfg.table()
        cfg.mode_profiles()
        cfg.band_scale()
        return cfg

    @classmethod
    def load(cls, path) -> "AppConfig":
        try:
            with open(path, "rb") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config {path}: {exc}") from exc

    def dose_config(self) -> DoseConfig:
        pollutants = []
        for name in self.pollutants:
            p = Pollutant.from_parameter(str(name))
            if p is None:
                raise ConfigError(f"unknown pollutant {name!r}")
            pollutants.append(p)
        if self.max_distance_km <= 0 or self.max_time_offset_s < 0 or self.max_gap_s <= 0:
            raise ConfigError("windows must be positive")
        return DoseConfig(tuple(pollutants), float(self.max_time_offset_s), float(self.max_distance_km))

    def table(self) -> EquivalenceTable:
        return EquivalenceTable.from_dict({"v_day_m3": self.v_day_m3, "dose_per_cigarette_ug": self.equivalence})

    def mode_profiles(self) -> dict:
        modes = dict(DEFAULT_MODES)
        for name, override in self.modes.items():
            mode = parse_mode(name)
            base = modes[mode]
            extra = set(override) - {"speed_kmh", "effort_fraction"}
            if extra:
                raise ConfigError(f"unknown mode keys: {', '.join(sorted(extra))}")
            modes[mode] = ModeProfile(
                float(override.get("speed_kmh", base.speed_kmh)),
                float(override.get("effort_fraction", base.effort_fraction)),
            )
        return modes

    def band_scale(self) -> BandScale:
        return BandScale.from_dict(self.bands)
