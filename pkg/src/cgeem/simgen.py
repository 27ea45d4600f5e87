"""Pseudo-flight-recorder generation with known ground truth.

The pipeline mirrors the verification protocol: synthesize a quasi-steady
cruise state history, evaluate the noise-free forces with a chosen truth
vector, emit native-rate raw channels in source units, perturb them with
per-channel Gaussian noise plus quantization, and align back to a
:class:`FlightSegment` exactly as real recorder data would be.

The default trajectory carries small fast fluctuations (turbulence-like
angle-of-attack jitter on the vanes, airspeed jitter, autothrottle fuel
trims) on top of the slow cruise wander.  These are what give the
constant-gain estimator its sample-to-sample excitation; perfectly smooth
synthetic cruise data is far less identifiable than real recordings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .aeromodel import (
    SECONDS_PER_HOUR,
    AeroParameters,
    AircraftConfig,
    predict_measurement,
)
from .channels import (
    CELSIUS_OFFSET,
    DEG_TO_RAD,
    G_TO_MS2,
    KNOTS_TO_MS,
    LBS_TO_KG,
    QAR_SCHEMA,
    schema_by_code,
)
from .errors import FormatError
from .flightdata import (
    GAMMA_AIR,
    R_AIR,
    ChannelSeries,
    FlightSegment,
    RawChannelTable,
    align_and_convert,
    derive_mach_array,
)

#: ground-truth defaults: A321 fleet-mean coefficients
A321_FLEET_MEANS = AeroParameters(
    c_l0=0.205, c_l_alpha=0.0256, c_lm=0.157,
    c_d0=0.0054, c_dl=0.0019, c_tv=0.0329,
)

#: cruise Mach of the reference scenario.  Set to the fleet-mean ratio
#: C_LM / C_L0: estimates produced by this framework encode the operating
#: Mach in that ratio, so simulating at the same Mach keeps the truth
#: vector inside the estimator's reachable subspace (see README).
REFERENCE_MACH = 0.157 / 0.205

#: default sensor-noise level as a fraction of each channel's granularity
DEFAULT_NOISE_FACTOR = 0.1

REFERENCE_SEED = 20250809

Component = tuple[float, float, float]      # amplitude, period_s, phase_rad


@dataclass(frozen=True)
class CruiseProfile:
    """Shape of the synthetic quasi-steady cruise trajectory.

    Harmonic components are (amplitude, period_s, phase_rad) triples.
    ``alpha_slow`` components appear in both pitch and angle of attack
    (rigid-body motion); ``alpha_gusts`` are turbulence-induced flow-angle
    fluctuations seen by the vanes only.
    """

    v_mean: float = 226.0                   # m/s
    v_ramp: float = 1.5                     # +/- m/s drift over the segment
    v_components: tuple[Component, ...] = (
        (1.2, 45.0, 0.7), (0.8, 5.7, 1.3), (0.5, 2.3, 4.1),
    )
    alpha_mean_deg: float = 2.5
    alpha_slow: tuple[Component, ...] = ((0.3, 60.0, 1.9),)
    alpha_gusts: tuple[Component, ...] = ((0.45, 7.3, 0.4), (0.30, 3.1, 2.2))
    alpha_start_dip_deg: float = 0.0        # pitch settles up from a low start
    alpha_start_tau_s: float = 10.0
    gust_onset_tau_s: float = 0.0           # chop builds up over this timescale
    gamma_deg: float = 0.0
    mass0: float = 70000.0                  # kg
    fuel_flow: float = 1.5                  # kg/s, both engines
    ff_components: tuple[Component, ...] = ((0.02, 13.0, 2.6), (0.015, 4.7, 5.0))
    mach_target: float = REFERENCE_MACH     # sets the (constant) TAT

    def tat_kelvin(self) -> float:
        t_s = (self.v_mean / self.mach_target) ** 2 / (GAMMA_AIR * R_AIR)
        return t_s * (1.0 + 0.2 * self.mach_target ** 2)


def _harmonics(t: np.ndarray, components) -> np.ndarray:
    out = np.zeros_like(t)
    for amp, period, phase in components:
        out += amp * np.sin(2.0 * np.pi * t / period + phase)
    return out


def synth_trajectory(duration_s: float = 200.0, rate_hz: float = 1.0,
                     profile: CruiseProfile = CruiseProfile()) -> FlightSegment:
    """Quasi-steady cruise state history; acceleration channels left zero.

    Mass decreases with the integrated fuel flow; TAT is constant; the
    pitch rate is the numerical derivative of the emitted pitch series.
    """
    n = int(round(duration_s * rate_hz))
    if n < 50:
        raise FormatError("duration must cover at least 50 samples")
    dt = 1.0 / rate_hz
    t = np.arange(n) * dt

    v = profile.v_mean + profile.v_ramp * (2.0 * t / max(t[-1], dt) - 1.0)
    v = v + _harmonics(t, profile.v_components)
    gamma = np.full(n, profile.gamma_deg * DEG_TO_RAD)
    theta_deg = profile.alpha_mean_deg + _harmonics(t, profile.alpha_slow)
    if profile.alpha_start_dip_deg != 0.0:
        theta_deg = theta_deg - profile.alpha_start_dip_deg * np.exp(
            -t / profile.alpha_start_tau_s)
    gusts_deg = _harmonics(t, profile.alpha_gusts)
    if profile.gust_onset_tau_s > 0.0:
        gusts_deg = gusts_deg * (1.0 - np.exp(-t / profile.gust_onset_tau_s))
    theta = theta_deg * DEG_TO_RAD + gamma
    alpha = (theta_deg + gusts_deg) * DEG_TO_RAD
    q = np.gradient(theta, t)

    fuel = profile.fuel_flow * (1.0 + _harmonics(t, profile.ff_components))
    burn = np.concatenate(([0.0], np.cumsum(0.5 * (fuel[1:] + fuel[:-1]) * dt)))
    mass = profile.mass0 - burn

    tat = np.full(n, profile.tat_kelvin())
    mach, static_temp = derive_mach_array(v, tat)

    return FlightSegment(
        t=t, alpha=alpha, q=q, theta=theta, V=v, gamma=gamma,
        a_x=np.zeros(n), a_z=np.zeros(n), mass=mass, fuel_flow=fuel,
        tat=tat, mach=mach, static_temp=static_temp, grid_rate_hz=rate_hz,
    )


def synth_forces(truth: AeroParameters, states: FlightSegment,
                 cfg: AircraftConfig) -> FlightSegment:
    """Fill the acceleration channels with the noise-free model output."""
    a_x = np.empty(len(states))
    a_z = np.empty(len(states))
    for i, sample in enumerate(states):
        z_hat = predict_measurement(truth, sample, cfg)
        a_x[i], a_z[i] = z_hat[4], z_hat[5]
    return replace(states, a_x=a_x, a_z=a_z)


# --- raw-channel emission --------------------------------------------------

def _native_times(rate_hz: float, duration_s: float) -> np.ndarray:
    period = 1.0 / rate_hz
    n = int(math.floor((duration_s - 1e-9) / period)) + 1
    return np.arange(n) * period


def segment_to_raw(segment: FlightSegment, schema=QAR_SCHEMA) -> RawChannelTable:
    """Emit native-rate raw channels (source units) by zero-order hold.

    Each grid value is held across its grid interval, so aligning the
    result back at the same grid rate reproduces the segment values.
    """
    by_code = schema_by_code(schema)
    duration = len(segment) / segment.grid_rate_hz

    source = {
        "TAS": segment.V / KNOTS_TO_MS,
        "GW": segment.mass / LBS_TO_KG,
        "VRTG": segment.a_z / G_TO_MS2,
        "LONG": segment.a_x / G_TO_MS2,
        "PITCH": segment.theta / DEG_TO_RAD,
        "FLT_PATH": segment.gamma / DEG_TO_RAD,
        "PITCH_RATE": segment.q / DEG_TO_RAD,
        "TAT": segment.tat - CELSIUS_OFFSET,
        "FF1": 0.5 * segment.fuel_flow / LBS_TO_KG * SECONDS_PER_HOUR,
        "FF2": 0.5 * segment.fuel_flow / LBS_TO_KG * SECONDS_PER_HOUR,
        "AOAL": segment.alpha / DEG_TO_RAD,
        "AOAR": segment.alpha / DEG_TO_RAD,
    }
    channels = {}
    for code, grid_values in source.items():
        rate = float(by_code[code].sample_rate_hz)
        t = _native_times(rate, duration)
        idx = np.minimum((t * segment.grid_rate_hz).astype(int), len(segment) - 1)
        channels[code] = ChannelSeries(t=t, values=grid_values[idx])
    missing = tuple(c.qar_code for c in schema if c.qar_code not in channels)
    return RawChannelTable(channels=channels, missing=missing,
                           source=segment.flight_id)


# --- noise injection ---------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Per-channel Gaussian sigma and quantization step, source units."""

    sigma: dict[str, float]
    quant: dict[str, float]

    @classmethod
    def scaled(cls, factor: float, schema=QAR_SCHEMA) -> "NoiseSpec":
        """Sigma and quantization step at ``factor`` times each granularity."""
        if factor < 0:
            raise FormatError("noise factor must be >= 0")
        sigma = {c.qar_code: c.granularity * factor for c in schema}
        quant = {c.qar_code: c.granularity * factor for c in schema}
        return cls(sigma=sigma, quant=quant)

    @classmethod
    def default(cls, schema=QAR_SCHEMA) -> "NoiseSpec":
        return cls.scaled(DEFAULT_NOISE_FACTOR, schema)

    @classmethod
    def table1(cls, schema=QAR_SCHEMA) -> "NoiseSpec":
        """Noise at the full Table-level granularity of every channel."""
        return cls.scaled(1.0, schema)

    @classmethod
    def off(cls, schema=QAR_SCHEMA) -> "NoiseSpec":
        return cls(sigma={c.qar_code: 0.0 for c in schema},
                   quant={c.qar_code: 0.0 for c in schema})

    def rescale(self, scale: float) -> "NoiseSpec":
        if scale < 0:
            raise FormatError("noise scale must be >= 0")
        return NoiseSpec(sigma={k: v * scale for k, v in self.sigma.items()},
                         quant={k: v * scale for k, v in self.quant.items()})


def quantize(values: np.ndarray, step: float) -> np.ndarray:
    """Round to the nearest multiple of ``step`` (no-op for step <= 0)."""
    if step <= 0:
        return values
    return np.round(values / step) * step


def add_noise(raw: RawChannelTable, noise: NoiseSpec, seed) -> RawChannelTable:
    """Independent Gaussian noise then quantization, per channel and sample.

    With all sigmas and steps zero the table is returned bit-identical.
    Channel order is fixed, so a given seed always produces the same
    draws.
    """
    rng = np.random.default_rng(seed)
    channels = {}
    for code in sorted(raw.channels):
        series = raw.channels[code]
        values = series.values.copy()
        sigma = noise.sigma.get(code, 0.0)
        if sigma > 0:
            values = values + rng.normal(0.0, sigma, size=len(values))
        values = quantize(values, noise.quant.get(code, 0.0))
        channels[code] = ChannelSeries(t=series.t.copy(), values=values)
    return RawChannelTable(channels=channels, missing=raw.missing, source=raw.source)


# --- scenario-level API ------------------------------------------------------

@dataclass(frozen=True)
class SimScenario:
    """Everything needed to reproduce one pseudo-recorder dataset."""

    truth: AeroParameters = A321_FLEET_MEANS
    cfg: AircraftConfig = AircraftConfig()
    profile: CruiseProfile = CruiseProfile()
    noise: NoiseSpec = field(default_factory=NoiseSpec.default)
    seed: int = REFERENCE_SEED
    duration_s: float = 200.0
    rate_hz: float = 1.0
    flight_id: str = "sim"


@dataclass
class SimResult:
    segment: FlightSegment          # noisy, aligned (what the estimator sees)
    clean: FlightSegment            # noise-free grid history
    raw: RawChannelTable            # noisy native-rate channels
    scenario: SimScenario


def simulate_segment(scenario: SimScenario) -> SimResult:
    """Run the full generation pipeline for one scenario."""
    states = synth_trajectory(scenario.duration_s, scenario.rate_hz, scenario.profile)
    clean = synth_forces(scenario.truth, states, scenario.cfg)
    clean.flight_id = scenario.flight_id
    raw = add_noise(segment_to_raw(clean), scenario.noise, scenario.seed)
    segment = align_and_convert(raw, grid_rate_hz=scenario.rate_hz,
                                flight_id=scenario.flight_id,
                                aircraft_type=scenario.cfg.aircraft_type)
    return SimResult(segment=segment, clean=clean, raw=raw, scenario=scenario)


def reference_scenario(seed: int = REFERENCE_SEED, noise_scale: float = 1.0,
                       flight_id: str = "reference") -> SimScenario:
    """The fixed scenario used by the verification and acceptance suites."""
    return SimScenario(noise=NoiseSpec.default().rescale(noise_scale),
                       seed=seed, flight_id=flight_id)


def noise_sweep(scenario: SimScenario, scales, run_pipeline) -> list[dict]:
    """Rerun the pipeline at several noise scales.

    ``run_pipeline(segment)`` must return (theta_estimates, report)-like
    output: a mapping of parameter name to estimate plus a ConvergenceReport.
    Per-scale generator streams derive from (seed, scale index); failures
    are recorded and the sweep continues.
    """
    scales = list(scales)
    if not scales:
        raise FormatError("scales must be non-empty")
    if any(s < 0 for s in scales):
        raise FormatError("scales must be non-negative")
    truth = scenario.truth.as_dict()
    records = []
    for i, scale in enumerate(scales):
        seed_i = np.random.SeedSequence([scenario.seed, i])
        sub = replace(scenario, noise=scenario.noise.rescale(scale),
                      flight_id=f"{scenario.flight_id}_x{i}")
        record = {"scale": scale, "ok": False}
        try:
            states = synth_trajectory(sub.duration_s, sub.rate_hz, sub.profile)
            clean = synth_forces(sub.truth, states, sub.cfg)
            clean.flight_id = sub.flight_id
            raw = add_noise(segment_to_raw(clean), sub.noise, seed_i)
            segment = align_and_convert(raw, grid_rate_hz=sub.rate_hz,
                                        flight_id=sub.flight_id)
            estimates, report = run_pipeline(segment)
            record["ok"] = True
            record["relative_errors"] = {
                name: abs(estimates[name] - truth[name]) / abs(truth[name])
                for name in truth
            }
            record["cv"] = {rec.name: rec.cv for rec in report.records}
            record["verdict"] = report.verdict
        except Exception as exc:   # sweep proceeds with survivors
            record["error"] = str(exc)
        records.append(record)
    return records


# --- scenario JSON -----------------------------------------------------------

def scenario_to_json(scenario: SimScenario, path):
    data = {
        "truth": scenario.truth.as_dict(),
        "cfg": {
            "wing_area_m2": scenario.cfg.wing_area,
            "sigma_rad": scenario.cfg.sigma,
            "t0_tsfc": scenario.cfg.t0,
            "rho_mode": scenario.cfg.rho_mode,
            "rho_fixed": scenario.cfg.rho_fixed,
            "altitude_m": scenario.cfg.altitude_m,
            "aircraft_type": scenario.cfg.aircraft_type,
        },
        "profile": {
            "v_mean": scenario.profile.v_mean,
            "v_ramp": scenario.profile.v_ramp,
            "v_components": [list(c) for c in scenario.profile.v_components],
            "alpha_mean_deg": scenario.profile.alpha_mean_deg,
            "alpha_slow": [list(c) for c in scenario.profile.alpha_slow],
            "alpha_gusts": [list(c) for c in scenario.profile.alpha_gusts],
            "alpha_start_dip_deg": scenario.profile.alpha_start_dip_deg,
            "alpha_start_tau_s": scenario.profile.alpha_start_tau_s,
            "gust_onset_tau_s": scenario.profile.gust_onset_tau_s,
            "gamma_deg": scenario.profile.gamma_deg,
            "mass0": scenario.profile.mass0,
            "fuel_flow": scenario.profile.fuel_flow,
            "ff_components": [list(c) for c in scenario.profile.ff_components],
            "mach_target": scenario.profile.mach_target,
        },
        "noise": {"sigma": scenario.noise.sigma, "quant": scenario.noise.quant},
        "seed": scenario.seed,
        "duration_s": scenario.duration_s,
        "rate_hz": scenario.rate_hz,
        "flight_id": scenario.flight_id,
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def scenario_from_json(path) -> SimScenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    try:
        truth = AeroParameters(**data["truth"]) if "truth" in data else A321_FLEET_MEANS
        cfg_data = data.get("cfg", {})
        cfg = AircraftConfig(
            wing_area=cfg_data.get("wing_area_m2", AircraftConfig().wing_area),
            sigma=cfg_data.get("sigma_rad", 0.0),
            t0=cfg_data.get("t0_tsfc", AircraftConfig().t0),
            rho_mode=cfg_data.get("rho_mode", "fixed"),
            rho_fixed=cfg_data.get("rho_fixed", AircraftConfig().rho_fixed),
            altitude_m=cfg_data.get("altitude_m", AircraftConfig().altitude_m),
            aircraft_type=cfg_data.get("aircraft_type", "A321"),
        )
        prof_data = data.get("profile", {})
        prof_kw = dict(prof_data)
        for key in ("v_components", "alpha_slow", "alpha_gusts", "ff_components"):
            if key in prof_kw:
                prof_kw[key] = tuple(tuple(c) for c in prof_kw[key])
        profile = CruiseProfile(**prof_kw)
        if "noise" in data:
            noise = NoiseSpec(sigma=dict(data["noise"]["sigma"]),
                              quant=dict(data["noise"]["quant"]))
        else:
            noise = NoiseSpec.default()
        return SimScenario(
            truth=truth, cfg=cfg, profile=profile, noise=noise,
            seed=int(data.get("seed", REFERENCE_SEED)),
            duration_s=float(data.get("duration_s", 200.0)),
            rate_hz=float(data.get("rate_hz", 1.0)),
            flight_id=str(data.get("flight_id", "sim")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad scenario ({exc})") from None
