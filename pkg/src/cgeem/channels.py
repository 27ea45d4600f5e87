"""Flight-recorder channel schema: codes, units, granularities, sample rates.

The built-in schema lists the 17 channels used for longitudinal
identification.  Eleven are mandatory for the pipeline; wind, drift and
engine-spool channels are optional provenance data.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import FormatError

# unit conversion factors (source unit -> SI)
KNOTS_TO_MS = 0.514444
LBS_TO_KG = 0.453592
G_TO_MS2 = 9.80665
DEG_TO_RAD = 0.017453292519943295  # pi / 180
LBS_PER_HOUR_TO_KG_PER_S = LBS_TO_KG / 3600.0
CELSIUS_OFFSET = 273.15

#: source units the schema understands
UNITS = (
    "knots", "lbs", "g", "degree", "degree-per-second",
    "celsius", "percent", "lbs-per-hour",
)


@dataclass(frozen=True)
class ChannelSpec:
    """One recorded channel: identity, physical meaning, unit and timing."""

    qar_code: str
    physical_meaning: str
    unit: str
    granularity: float          # quantization step, source unit
    sample_rate_hz: Fraction

    def __post_init__(self):
        if self.unit not in UNITS:
            raise FormatError(f"{self.qar_code}: unknown unit {self.unit!r}")
        if self.granularity <= 0:
            raise FormatError(f"{self.qar_code}: granularity must be > 0")
        if self.sample_rate_hz <= 0:
            raise FormatError(f"{self.qar_code}: sample rate must be > 0")

    @property
    def period_s(self) -> float:
        return float(1 / self.sample_rate_hz)


def _c(code, meaning, unit, gran, rate) -> ChannelSpec:
    return ChannelSpec(code, meaning, unit, gran, Fraction(rate))


#: the full built-in channel table (17 channels).  TAS is a computed
#: parameter delivered at 1 Hz.
QAR_SCHEMA: tuple[ChannelSpec, ...] = (
    _c("TAS", "true air speed", "knots", 0.0001, 1),
    _c("GW", "gross weight", "lbs", 0.0001, Fraction(1, 64)),
    _c("VRTG", "vertical g-acceleration", "g", 0.0039, 16),
    _c("LONG", "longitudinal g-acceleration", "g", 0.0039, 16),
    _c("PITCH", "pitch angle", "degree", 0.0001, 4),
    _c("FLT_PATH", "flight path angle", "degree", 0.0001, 1),
    _c("PITCH_RATE", "pitch rate", "degree-per-second", 0.0001, 8),
    _c("TAT", "total air temperature", "celsius", 0.25, 1),
    _c("DRIFT", "drift angle", "degree", 0.0039, 4),
    _c("WIN_SPD", "wind speed", "knots", 1.0, 2),
    _c("WIN_DIR", "wind direction", "degree", 0.0039, 2),
    _c("N11", "engine 1 low spool speed", "percent", 0.125, Fraction(1, 4)),
    _c("N12", "engine 2 low spool speed", "percent", 0.125, Fraction(1, 4)),
    _c("FF1", "engine 1 fuel flow", "lbs-per-hour", 0.001, 1),
    _c("FF2", "engine 2 fuel flow", "lbs-per-hour", 0.001, 1),
    _c("AOAL", "angle of attack, left vane", "degree", 0.3516, 4),
    _c("AOAR", "angle of attack, right vane", "degree", 0.3516, 4),
)

#: channels the longitudinal pipeline cannot run without
MANDATORY_CHANNELS = (
    "TAS", "GW", "VRTG", "LONG", "PITCH", "PITCH_RATE",
    "TAT", "FF1", "FF2", "AOAL", "AOAR",
)

#: channels that may be absent from an input file (flagged, not fatal)
OPTIONAL_CHANNELS = tuple(
    c.qar_code for c in QAR_SCHEMA if c.qar_code not in MANDATORY_CHANNELS
)


def schema_by_code(schema=QAR_SCHEMA) -> dict[str, ChannelSpec]:
    return {c.qar_code: c for c in schema}


def convert_to_si(values, unit: str):
    """Convert an array of source-unit values to SI."""
    if unit == "knots":
        return values * KNOTS_TO_MS
    if unit == "lbs":
        return values * LBS_TO_KG
    if unit == "g":
        return values * G_TO_MS2
    if unit == "degree":
        return values * DEG_TO_RAD
    if unit == "degree-per-second":
        return values * DEG_TO_RAD
    if unit == "celsius":
        return values + CELSIUS_OFFSET
    if unit == "percent":
        return values
    if unit == "lbs-per-hour":
        return values * LBS_PER_HOUR_TO_KG_PER_S
    raise FormatError(f"unknown unit {unit!r}")
