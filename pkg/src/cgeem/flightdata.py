"""Loading, unit conversion, multi-rate alignment and cruise segmentation.

Raw recorder files are plain CSV with a ``t`` column (seconds) plus one
column per QAR code; each row carries values only for the channels that
have a sample at that instant.  ``align_and_convert`` turns such a table
into a :class:`FlightSegment` on a uniform grid in SI units.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channels import (
    DEG_TO_RAD,
    MANDATORY_CHANNELS,
    QAR_SCHEMA,
    convert_to_si,
    schema_by_code,
)
from .errors import FormatError, GapError, NumericError, SchemaError

GAMMA_AIR = 1.4            # ratio of specific heats, dry air
R_AIR = 287.05             # J/(kg K)

SEGMENT_COLUMNS = (
    "t", "alpha", "q", "theta", "V", "gamma", "a_x", "a_z",
    "mass", "fuel_flow", "tat", "mach", "static_temp",
)

MIN_SEGMENT_SAMPLES = 50


@dataclass
class ChannelSeries:
    """Native-rate samples of one channel, source units."""

    t: np.ndarray
    values: np.ndarray


@dataclass
class RawChannelTable:
    """Per-channel time series in source units at native rates."""

    channels: dict[str, ChannelSeries]
    missing: tuple[str, ...] = ()
    source: str = ""

    def duration(self) -> float:
        return max(float(s.t[-1]) for s in self.channels.values() if len(s.t))


@dataclass(frozen=True)
class MeasuredSample:
    """One time-aligned sample in SI units.

    ``alpha`` is the fused (left/right vane mean) angle of attack in
    radians; the degree value used by the lift/drag polynomials is
    exposed as :attr:`alpha_deg`.
    """

    t: float
    alpha: float        # rad
    q: float            # rad/s
    theta: float        # rad
    V: float            # m/s
    gamma: float        # rad
    a_x: float          # m/s^2
    a_z: float          # m/s^2
    mass: float         # kg
    fuel_flow: float    # kg/s, both engines
    tat: float          # K
    mach: float
    static_temp: float  # K

    @property
    def alpha_deg(self) -> float:
        return math.degrees(self.alpha)

    def validate(self):
        if not (self.V > 0 and self.mass > 0 and self.tat > 0):
            raise FormatError("sample requires V > 0, mass > 0, tat > 0")
        if not (0.0 < self.mach < 1.0):
            raise FormatError(f"mach {self.mach:.4f} outside (0, 1)")
        if abs(self.alpha) >= 0.35:
            raise FormatError(f"|alpha| = {abs(self.alpha):.3f} rad exceeds cruise bound")


@dataclass
class FlightSegment:
    """Uniform-grid, SI-unit cruise segment ready for estimation."""

    t: np.ndarray
    alpha: np.ndarray
    q: np.ndarray
    theta: np.ndarray
    V: np.ndarray
    gamma: np.ndarray
    a_x: np.ndarray
    a_z: np.ndarray
    mass: np.ndarray
    fuel_flow: np.ndarray
    tat: np.ndarray
    mach: np.ndarray
    static_temp: np.ndarray
    grid_rate_hz: float = 1.0
    flight_id: str = ""
    aircraft_type: str = ""
    tail_id: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def sample(self, i: int) -> MeasuredSample:
        return MeasuredSample(
            t=float(self.t[i]), alpha=float(self.alpha[i]), q=float(self.q[i]),
            theta=float(self.theta[i]), V=float(self.V[i]), gamma=float(self.gamma[i]),
            a_x=float(self.a_x[i]), a_z=float(self.a_z[i]), mass=float(self.mass[i]),
            fuel_flow=float(self.fuel_flow[i]), tat=float(self.tat[i]),
            mach=float(self.mach[i]), static_temp=float(self.static_temp[i]),
        )

    def __iter__(self):
        return (self.sample(i) for i in range(len(self)))

    def validate(self):
        if len(self) < MIN_SEGMENT_SAMPLES:
            raise FormatError(
                f"segment has {len(self)} samples; at least {MIN_SEGMENT_SAMPLES} required"
            )
        dt = np.diff(self.t)
        if not np.all(dt > 0):
            raise FormatError("segment timestamps must be strictly increasing")
        if not np.allclose(dt, 1.0 / self.grid_rate_hz, rtol=0, atol=1e-9):
            raise FormatError("segment timestamps must be uniformly spaced")
        self.sample(0).validate()
        self.sample(len(self) - 1).validate()

    def slice(self, start: int, stop: int, rebase_time: bool = True) -> "FlightSegment":
        kw = {}
        for name in SEGMENT_COLUMNS:
            kw[name] = getattr(self, name)[start:stop].copy()
        if rebase_time:
            kw["t"] = kw["t"] - kw["t"][0]
        return replace(self, **kw)

    # --- CSV round trip -------------------------------------------------

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SEGMENT_COLUMNS)
            for i in range(len(self)):
                writer.writerow([repr(float(getattr(self, c)[i])) for c in SEGMENT_COLUMNS])

    @classmethod
    def from_csv(cls, path, grid_rate_hz: float | None = None,
                 flight_id: str = "", aircraft_type: str = "", tail_id: str = "") -> "FlightSegment":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != SEGMENT_COLUMNS:
                raise SchemaError(f"{path}: expected columns {','.join(SEGMENT_COLUMNS)}")
            rows = [[float(x) for x in row] for row in reader if row]
        if not rows:
            raise FormatError(f"{path}: empty segment file")
        data = np.asarray(rows).T
        kw = {name: data[i] for i, name in enumerate(SEGMENT_COLUMNS)}
        if grid_rate_hz is None:
            dt = np.diff(kw["t"])
            if len(dt) == 0 or not np.all(dt > 0):
                raise FormatError(f"{path}: timestamps not increasing")
            grid_rate_hz = 1.0 / float(np.median(dt))
        return cls(grid_rate_hz=grid_rate_hz, flight_id=flight_id,
                   aircraft_type=aircraft_type, tail_id=tail_id, **kw)


# --- raw file ingestion --------------------------------------------------

def load_segment(path, schema=QAR_SCHEMA) -> RawChannelTable:
    """Read a raw multi-rate channel CSV.

    Empty cells mean "no sample for this channel at this instant".
    Mandatory channels must be present as columns; optional channels may
    be absent and are reported in ``missing``.
    """
    by_code = schema_by_code(schema)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if not header or header[0] != "t":
            raise FormatError(f"{path}: first column must be 't'")
        codes = header[1:]
        unknown = [c for c in codes if c not in by_code]
        if unknown:
            raise SchemaError(f"{path}: unknown channel columns {unknown}")
        for code in MANDATORY_CHANNELS:
            if code not in codes:
                raise SchemaError(f"{path}: missing mandatory channel {code}")
        times: dict[str, list[float]] = {c: [] for c in codes}
        values: dict[str, list[float]] = {c: [] for c in codes}
        for row in reader:
            if not row:
                continue
            t = float(row[0])
            for code, cell in zip(codes, row[1:]):
                if cell != "":
                    times[code].append(t)
                    values[code].append(float(cell))
    channels = {}
    for code in codes:
        t = np.asarray(times[code])
        if len(t) == 0:
            raise SchemaError(f"{path}: channel {code} has no samples")
        if np.any(np.diff(t) <= 0):
            raise FormatError(f"{path}: channel {code} timestamps not strictly increasing")
        channels[code] = ChannelSeries(t=t, values=np.asarray(values[code]))
    missing = tuple(c.qar_code for c in schema if c.qar_code not in codes)
    return RawChannelTable(channels=channels, missing=missing, source=str(path))


def _check_gaps(code: str, series: ChannelSeries, period: float):
    if len(series.t) < 2:
        return
    dt = np.diff(series.t)
    bad = np.nonzero(dt > 2.0 * period + 1e-9)[0]
    if len(bad):
        i = int(bad[0])
        raise GapError(code, float(series.t[i]), float(series.t[i + 1]))


def resample_channel(t: np.ndarray, values: np.ndarray, native_rate_hz: float,
                     grid_t: np.ndarray, grid_dt: float) -> np.ndarray:
    """Resample one channel onto the grid.

    Channels faster than the grid are block-averaged over each grid
    interval [t_k, t_k + dt); slower channels hold the last observed
    value.  Applying this to an already-on-grid channel is the identity.
    """
    if native_rate_hz >= 1.0 / grid_dt - 1e-12:
        out = np.empty(len(grid_t))
        idx = np.searchsorted(t, grid_t - 1e-9, side="left")
        idx_end = np.searchsorted(t, grid_t + grid_dt - 1e-9, side="left")
        for k in range(len(grid_t)):
            lo, hi = idx[k], idx_end[k]
            if hi <= lo:
                raise GapError("<grid>", float(grid_t[k]), float(grid_t[k] + grid_dt))
            out[k] = values[lo:hi].mean()
        return out
    # hold last observation
    idx = np.searchsorted(t, grid_t + 1e-9, side="right") - 1
    if np.any(idx < 0):
        k = int(np.nonzero(idx < 0)[0][0])
        raise GapError("<grid>", 0.0, float(grid_t[k]))
    return values[idx]


def derive_mach(V: float, tat: float, tol: float = 1e-9, max_iter: int = 100):
    """Recover Mach and static temperature from TAS and total temperature.

    Solves the coupled pair M = V / sqrt(gamma R T_s), T_s = tat / (1 + 0.2 M^2)
    by fixed-point iteration.
    """
    if V <= 0 or tat <= 0:
        raise FormatError("derive_mach requires V > 0 and tat > 0")
    mach = 0.0
    for _ in range(max_iter):
        t_s = tat / (1.0 + 0.2 * mach * mach)
        new = V / math.sqrt(GAMMA_AIR * R_AIR * t_s)
        if abs(new - mach) < tol:
            mach = new
            break
        mach = new
    else:
        raise NumericError(f"derive_mach did not converge for V={V}, tat={tat}")
    return mach, tat / (1.0 + 0.2 * mach * mach)


def derive_mach_array(V: np.ndarray, tat: np.ndarray):
    mach = np.empty(len(V))
    t_s = np.empty(len(V))
    for i in range(len(V)):
        mach[i], t_s[i] = derive_mach(float(V[i]), float(tat[i]))
    return mach, t_s


def align_and_convert(raw: RawChannelTable, schema=QAR_SCHEMA, grid_rate_hz: float = 1.0,
                      flight_id: str = "", aircraft_type: str = "",
                      tail_id: str = "") -> FlightSegment:
    """Resample all channels to a common grid and convert to SI.

    Vane angles are fused as alpha = (AOAL + AOAR) / 2 and fuel flows
    summed over both engines.  Mach and static temperature are derived
    from TAS/TAT after alignment.  A missing FLT_PATH yields gamma = 0.
    """
    by_code = schema_by_code(schema)
    max_rate = max(float(by_code[c].sample_rate_hz) for c in raw.channels)
    if grid_rate_hz > max_rate + 1e-12:
        raise FormatError(
            f"grid rate {grid_rate_hz} Hz exceeds fastest available channel ({max_rate} Hz)"
        )
    grid_dt = 1.0 / grid_rate_hz
    duration = min(
        float(raw.channels[c].t[-1]) + by_code[c].period_s
        for c in MANDATORY_CHANNELS
    )
    n = int(math.floor(duration / grid_dt + 1e-9))
    if n < MIN_SEGMENT_SAMPLES:
        raise FormatError(
            f"raw table covers {n} grid samples at {grid_rate_hz} Hz; "
            f"at least {MIN_SEGMENT_SAMPLES} required"
        )
    grid_t = np.arange(n) * grid_dt

    si = {}
    for code, series in raw.channels.items():
        spec = by_code[code]
        _check_gaps(code, series, spec.period_s)
        try:
            on_grid = resample_channel(series.t, series.values,
                                       float(spec.sample_rate_hz), grid_t, grid_dt)
        except GapError as exc:
            raise GapError(code, exc.start, exc.end) from None
        si[code] = convert_to_si(on_grid, spec.unit)

    alpha = 0.5 * (si["AOAL"] + si["AOAR"])
    fuel_flow = si["FF1"] + si["FF2"]
    gamma = si.get("FLT_PATH", np.zeros(n))
    V = si["TAS"]
    tat = si["TAT"]
    mach, static_temp = derive_mach_array(V, tat)

    if not flight_id and raw.source:
        flight_id = raw.source.rsplit("/", 1)[-1].rsplit(".", 1)[0]

    seg = FlightSegment(
        t=grid_t, alpha=alpha, q=si["PITCH_RATE"], theta=si["PITCH"], V=V,
        gamma=gamma, a_x=si["LONG"], a_z=si["VRTG"], mass=si["GW"],
        fuel_flow=fuel_flow, tat=tat, mach=mach, static_temp=static_temp,
        grid_rate_hz=grid_rate_hz, flight_id=flight_id,
        aircraft_type=aircraft_type, tail_id=tail_id,
    )
    seg.validate()
    return seg


# --- cruise detection ----------------------------------------------------

@dataclass(frozen=True)
class CruiseCriteria:
    """Thresholds defining a quasi-steady, level cruise window."""

    gamma_max_deg: float = 0.3
    q_max_deg_s: float = 0.2
    v_std_max: float = 2.0          # m/s
    v_std_window_s: float = 60.0
    min_duration_s: float = 200.0


def _rolling_std(x: np.ndarray, half_width: int) -> np.ndarray:
    out = np.empty(len(x))
    for i in range(len(x)):
        lo = max(0, i - half_width)
        hi = min(len(x), i + half_width + 1)
        out[i] = np.std(x[lo:hi])
    return out


def detect_cruise_segments(full_flight: FlightSegment,
                           criteria: CruiseCriteria = CruiseCriteria()) -> list[FlightSegment]:
    """Find maximal windows satisfying the cruise criteria.

    Windows shorter than ``min_duration_s`` are discarded.  Returned
    segments have their time axes rebased to zero and are suffixed
    ``_seg<k>`` on the flight id.
    """
    gamma_max = criteria.gamma_max_deg * DEG_TO_RAD
    q_max = criteria.q_max_deg_s * DEG_TO_RAD
    half = max(1, int(round(criteria.v_std_window_s * full_flight.grid_rate_hz / 2)))
    v_std = _rolling_std(full_flight.V, half)
    ok = (
        (np.abs(full_flight.gamma) < gamma_max)
        & (np.abs(full_flight.q) < q_max)
        & (v_std < criteria.v_std_max)
    )
    min_len = int(round(criteria.min_duration_s * full_flight.grid_rate_hz))
    segments = []
    i = 0
    n = len(ok)
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j < n and ok[j]:
            j += 1
        if j - i >= min_len:
            seg = full_flight.slice(i, j)
            seg.flight_id = f"{full_flight.flight_id}_seg{len(segments)}"
            segments.append(seg)
        i = j
    return segments
