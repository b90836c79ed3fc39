"""Cigarette-equivalent score from a dose vector.

Reference exposures are daily rates: breathing a concentration C for a
day equals N passively smoked cigarettes. With a reference daily inhaled
volume V_day that is a dose of C × V_day per N cigarettes:

    PM2.5  10 µg/m³ -> 5.5 cig/day
    NO2    10 µg/m³ -> 2.5 cig/day
    BC      1 µg/m³ -> 4   cig/day
    CO      1 ppm   -> 1   cig/day
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .airquality import Pollutant, ppm_factor
from .errors import ConfigError

DEFAULT_V_DAY_M3 = 11.0

# pollutant -> (concentration in µg/m³, cigarettes per day at that concentration)
_REFERENCE_EXPOSURES = {
    Pollutant.PM25: (10.0, 5.5),
    Pollutant.NO2: (10.0, 2.5),
    Pollutant.BC: (1.0, 4.0),
    Pollutant.CO: (1.0 * ppm_factor(Pollutant.CO), 1.0),
}


@dataclass(frozen=True)
class EquivalenceTable:
    dose_per_cigarette_ug: dict  # Pollutant -> µg per cigarette
    v_day_m3: float = DEFAULT_V_DAY_M3

    def __post_init__(self):
        if not self.v_day_m3 > 0:
            raise ConfigError("v_day_m3 must be positive")
        for p, d in self.dose_per_cigarette_ug.items():
            if not (d > 0 and math.isfinite(d)):
                raise ConfigError(f"reference dose for {p.value} must be positive")

    def to_dict(self) -> dict:
        return {
            "v_day_m3": self.v_day_m3,
            "dose_per_cigarette_ug": {p.value: d for p, d in sorted(self.dose_per_cigarette_ug.items(), key=lambda kv: kv[0].value)},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EquivalenceTable":
        unknown = set(obj) - {"v_day_m3", "dose_per_cigarette_ug"}
        if unknown:
            raise ConfigError(f"unknown equivalence keys: {', '.join(sorted(unknown))}")
        v_day = float(obj.get("v_day_m3", DEFAULT_V_DAY_M3))
        doses = default_table(v_day).dose_per_cigarette_ug
        for name, value in (obj.get("dose_per_cigarette_ug") or {}).items():
            p = Pollutant.from_parameter(name)
            if p is None:
                raise ConfigError(f"unknown pollutant {name!r} in equivalence table")
            doses[p] = float(value)
        return cls(doses, v_day)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EquivalenceTable":
        return cls.from_dict(json.loads(text))


def default_table(v_day_m3: float = DEFAULT_V_DAY_M3) -> EquivalenceTable:
    doses = {p: conc * v_day_m3 / per_day for p, (conc, per_day) in _REFERENCE_EXPOSURES.items()}
    return EquivalenceTable(doses, v_day_m3)


@dataclass(frozen=True)
class CigaretteReport:
    per_pollutant: dict  # Pollutant -> cigarettes
    uncovered: tuple = ()  # pollutants with dose but no equivalence

    @property
    def total(self) -> float:
        return math.fsum(self.per_pollutant.values())


def cigarettes(totals, table: EquivalenceTable) -> CigaretteReport:
    per = {}
    uncovered = []
    for p, dose in totals.total_ug.items():
        ref = table.dose_per_cigarette_ug.get(p)
        if ref is None:
            if dose > 0:
                uncovered.append(p)
            continue
        per[p] = dose / ref
    return CigaretteReport(per, tuple(sorted(uncovered, key=lambda p: p.value)))
