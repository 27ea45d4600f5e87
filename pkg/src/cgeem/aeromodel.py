"""Longitudinal force model: lift, drag, thrust and predicted accelerations.

The measurement model maps a parameter vector plus one measured sample to
the predicted measurement [alpha, q, theta, V, a_x, a_z].  The first four
entries are copied from the measurement (equation-error formulation), so
only the acceleration channels depend on the parameters.

Convention notes:

* the lift/drag polynomials take angle of attack in degrees (matching
  fleet-table coefficient magnitudes) while the force resolution uses
  radians;
* TSFC is carried in kg/(N h); thrust therefore divides fuel flow in
  kg/h.  Samples store kg/s and the model converts at the boundary;
* forces scale with dynamic pressure as L = qbar * S * C_L, with density
  either fixed or from the standard atmosphere at a configured altitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ThrustModelError
from .flightdata import MeasuredSample

G0 = 9.80665
SECONDS_PER_HOUR = 3600.0

PARAM_NAMES_POLAR = ("c_l0", "c_l_alpha", "c_lm", "c_d0", "c_dl", "c_tv")
PARAM_NAMES_LINEAR = ("c_l0", "c_l_alpha", "c_lm", "c_d0", "c_dv", "c_d_alpha", "c_tv")

MEASUREMENT_CHANNELS = ("alpha", "q", "theta", "V", "a_x", "a_z")
ACCEL_CHANNEL_SLICE = slice(4, 6)

FD_REL_STEP = 1e-6
FD_ABS_STEP = 1e-8


@dataclass(frozen=True)
class AeroParameters:
    """Estimated coefficient vector, ordered [C_L0, C_La, C_LM, C_D0, C_DL, C_TV]."""

    c_l0: float = 0.0
    c_l_alpha: float = 0.0      # per degree
    c_lm: float = 0.0           # per unit Mach
    c_d0: float = 0.0
    c_dl: float = 0.0           # per C_L^2
    c_tv: float = 0.0           # TSFC slope per unit Mach, kg/(N h)

    def to_array(self) -> np.ndarray:
        return np.array([self.c_l0, self.c_l_alpha, self.c_lm,
                         self.c_d0, self.c_dl, self.c_tv])

    @classmethod
    def from_array(cls, vec) -> "AeroParameters":
        if len(vec) != 6:
            raise FormatError(f"expected 6 parameters, got {len(vec)}")
        return cls(*(float(x) for x in vec))

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES_POLAR}


@dataclass(frozen=True)
class AltDragParameters:
    """Alternative drag model C_D = C_D0 + C_DV * V/V0 + C_Da * alpha_deg."""

    c_d0: float = 0.0
    c_dv: float = 0.0
    c_d_alpha: float = 0.0      # per degree
    v0: float = 230.0           # reference speed, m/s

    def __post_init__(self):
        if self.v0 <= 0:
            raise FormatError("v0 must be positive")


@dataclass(frozen=True)
class AircraftConfig:
    """Fixed physical constants the estimation runs against."""

    wing_area: float = 122.6        # m^2
    sigma: float = 0.0              # thrust line offset, rad
    t0: float = 0.02                # baseline TSFC, kg/(N h)
    rho_mode: str = "fixed"         # "fixed" | "isa"
    rho_fixed: float = 0.38         # kg/m^3
    altitude_m: float = 10668.0     # used in isa mode
    aircraft_type: str = "A321"

    def __post_init__(self):
        if self.wing_area <= 0:
            raise FormatError("wing_area must be positive")
        if self.t0 <= 0:
            raise FormatError("t0 must be positive")
        if abs(self.sigma) >= 0.1:
            raise FormatError("|sigma| must be below 0.1 rad")
        if self.rho_mode not in ("fixed", "isa"):
            raise FormatError("rho_mode must be 'fixed' or 'isa'")

    def density(self) -> float:
        if self.rho_mode == "fixed":
            return self.rho_fixed
        return isa_density(self.altitude_m)


@dataclass(frozen=True)
class ModelInputs:
    """A measured sample plus its dynamic pressure."""

    sample: MeasuredSample
    qbar: float     # Pa

    def __post_init__(self):
        if self.qbar <= 0:
            raise FormatError("dynamic pressure must be positive")

    @classmethod
    def from_sample(cls, sample: MeasuredSample, cfg: AircraftConfig) -> "ModelInputs":
        return cls(sample=sample, qbar=0.5 * cfg.density() * sample.V ** 2)


def isa_density(altitude_m: float) -> float:
    """Standard-atmosphere density, valid to 20 km."""
    if altitude_m <= 11000.0:
        temp = 288.15 - 0.0065 * altitude_m
        return 1.225 * (temp / 288.15) ** 4.255876
    rho_tropo = 0.363918
    return rho_tropo * math.exp(-G0 * (altitude_m - 11000.0) / (287.05 * 216.65))


# --- coefficient and force evaluation -------------------------------------

def lift_coefficient(p: AeroParameters, alpha_deg: float, mach: float) -> float:
    return p.c_l0 + p.c_l_alpha * alpha_deg + p.c_lm * mach


def drag_coefficient_polar(p: AeroParameters, c_l: float) -> float:
    return p.c_d0 + p.c_dl * c_l * c_l


def drag_coefficient_linear(p: AltDragParameters, V: float, alpha_deg: float) -> float:
    return p.c_d0 + p.c_dv * V / p.v0 + p.c_d_alpha * alpha_deg


def tsfc(t0: float, c_tv: float, mach: float) -> float:
    value = t0 + c_tv * mach
    if value <= 0.0:
        raise ThrustModelError(f"TSFC = {value:.6g} <= 0 at mach {mach:.3f}")
    return value


def thrust(p: AeroParameters, fuel_flow: float, mach: float, cfg: AircraftConfig) -> float:
    """Thrust from fuel flow via the linear-in-Mach TSFC model.

    ``fuel_flow`` must be in the same mass-per-time unit as the TSFC
    numerator (kg/h for the default config).
    """
    return fuel_flow / tsfc(cfg.t0, p.c_tv, mach)


def forces(p: AeroParameters, inputs: ModelInputs, cfg: AircraftConfig):
    """Lift, drag (parabolic polar) and thrust in newtons."""
    s = inputs.sample
    c_l = lift_coefficient(p, s.alpha_deg, s.mach)
    c_d = drag_coefficient_polar(p, c_l)
    lift = inputs.qbar * cfg.wing_area * c_l
    drag = inputs.qbar * cfg.wing_area * c_d
    thr = thrust(p, s.fuel_flow * SECONDS_PER_HOUR, s.mach, cfg)
    return lift, drag, thr


def predict_accelerations(lift: float, drag: float, thr: float,
                          alpha_rad: float, sigma: float, mass: float):
    """Specific forces along body x and z from the force balance."""
    ca, sa = math.cos(alpha_rad), math.sin(alpha_rad)
    cs, ss = math.cos(sigma), math.sin(sigma)
    a_x = (-drag * ca - lift * sa + thr * cs) / mass
    a_z = (-drag * sa + lift * ca + thr * ss) / mass
    return a_x, a_z


def predict_measurement(p: AeroParameters, sample: MeasuredSample,
                        cfg: AircraftConfig) -> np.ndarray:
    """Predicted [alpha, q, theta, V, a_x, a_z] for one sample."""
    inputs = ModelInputs.from_sample(sample, cfg)
    lift, drag, thr = forces(p, inputs, cfg)
    a_x, a_z = predict_accelerations(lift, drag, thr, sample.alpha, cfg.sigma, sample.mass)
    return np.array([sample.alpha, sample.q, sample.theta, sample.V, a_x, a_z])


# --- generic parameter-vector interface (used by the estimators) ----------

def param_names(drag_model: str = "polar") -> tuple[str, ...]:
    if drag_model == "polar":
        return PARAM_NAMES_POLAR
    if drag_model == "linear":
        return PARAM_NAMES_LINEAR
    raise FormatError(f"unknown drag model {drag_model!r}")


def predict_vec(theta: np.ndarray, sample: MeasuredSample, cfg: AircraftConfig,
                drag_model: str = "polar", v0: float | None = None) -> np.ndarray:
    """Measurement prediction for a raw parameter vector of either layout."""
    if drag_model == "polar":
        return predict_measurement(AeroParameters.from_array(theta), sample, cfg)
    if drag_model != "linear":
        raise FormatError(f"unknown drag model {drag_model!r}")
    if len(theta) != 7:
        raise FormatError(f"linear drag layout expects 7 parameters, got {len(theta)}")
    if v0 is None:
        raise FormatError("linear drag model requires a reference speed v0")
    c_l0, c_l_alpha, c_lm, c_d0, c_dv, c_d_alpha, c_tv = (float(x) for x in theta)
    qbar = 0.5 * cfg.density() * sample.V ** 2
    c_l = c_l0 + c_l_alpha * sample.alpha_deg + c_lm * sample.mach
    alt = AltDragParameters(c_d0=c_d0, c_dv=c_dv, c_d_alpha=c_d_alpha, v0=v0)
    c_d = drag_coefficient_linear(alt, sample.V, sample.alpha_deg)
    lift = qbar * cfg.wing_area * c_l
    drag = qbar * cfg.wing_area * c_d
    thr = sample.fuel_flow * SECONDS_PER_HOUR / tsfc(cfg.t0, c_tv, sample.mach)
    a_x, a_z = predict_accelerations(lift, drag, thr, sample.alpha, cfg.sigma, sample.mass)
    return np.array([sample.alpha, sample.q, sample.theta, sample.V, a_x, a_z])


def jacobian(p: AeroParameters, sample: MeasuredSample, cfg: AircraftConfig,
             h_rel: float = FD_REL_STEP) -> np.ndarray:
    """Central finite-difference d(z_hat)/d(theta), 6x6; state rows are zero."""
    return jacobian_vec(p.to_array(), sample, cfg, drag_model="polar", h_rel=h_rel)


def jacobian_vec(theta: np.ndarray, sample: MeasuredSample, cfg: AircraftConfig,
                 drag_model: str = "polar", v0: float | None = None,
                 h_rel: float = FD_REL_STEP) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    n = len(theta)
    jac = np.zeros((6, n))
    for i in range(n):
        step = max(h_rel * abs(theta[i]), FD_ABS_STEP)
        plus = theta.copy()
        minus = theta.copy()
        plus[i] += step
        minus[i] -= step
        delta = (predict_vec(plus, sample, cfg, drag_model, v0)
                 - predict_vec(minus, sample, cfg, drag_model, v0))
        jac[:, i] = delta / (2.0 * step)
    jac[:4, :] = 0.0
    return jac


# --- config file -----------------------------------------------------------

CONFIG_KEYS = {"wing_area_m2", "sigma_rad", "t0_tsfc", "rho_mode", "rho_fixed",
               "altitude_m", "aircraft_type"}


def load_aircraft_config(path) -> AircraftConfig:
    """Read an AircraftConfig from a JSON file."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise FormatError(f"{path}: unknown config keys {sorted(unknown)}")
    kw = {}
    if "wing_area_m2" in data:
        kw["wing_area"] = float(data["wing_area_m2"])
    if "sigma_rad" in data:
        kw["sigma"] = float(data["sigma_rad"])
    if "t0_tsfc" in data:
        kw["t0"] = float(data["t0_tsfc"])
    if "rho_mode" in data:
        kw["rho_mode"] = str(data["rho_mode"])
    if "rho_fixed" in data:
        kw["rho_fixed"] = float(data["rho_fixed"])
    if "altitude_m" in data:
        kw["altitude_m"] = float(data["altitude_m"])
    if "aircraft_type" in data:
        kw["aircraft_type"] = str(data["aircraft_type"])
    return AircraftConfig(**kw)


def save_aircraft_config(cfg: AircraftConfig, path):
    data = {
        "wing_area_m2": cfg.wing_area,
        "sigma_rad": cfg.sigma,
        "t0_tsfc": cfg.t0,
        "rho_mode": cfg.rho_mode,
        "rho_fixed": cfg.rho_fixed,
        "altitude_m": cfg.altitude_m,
        "aircraft_type": cfg.aircraft_type,
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
