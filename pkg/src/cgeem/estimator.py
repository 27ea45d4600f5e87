"""Constant-gain and recursive-least-squares parameter estimators.

The constant-gain update never propagates the parameter covariance: the
apriori covariance used for the gain is reset to P0 at every step, so the
gain never decays.  The RLS baseline uses the textbook exponentially
weighted update and is included for the comparative analysis.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import convergence
from .aeromodel import (
    ACCEL_CHANNEL_SLICE,
    AircraftConfig,
    jacobian_vec,
    param_names,
    predict_vec,
)
from .errors import EstimatorStepError, FormatError, NumericError, ThrustModelError
from .flightdata import FlightSegment, MeasuredSample

COND_LIMIT = 1e14


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator tuning: initial covariance, noise covariance, variant flags.

    ``p0`` and ``r`` may be scalars (scaled identities of the right size)
    or full matrices.  ``channels`` selects the full 6-channel measurement
    vector or the reduced acceleration-only pair; both give identical
    parameter traces because the state channels carry zero residual.
    """

    p0: float | np.ndarray = 1e2
    r: float | np.ndarray = 1e-1
    theta0: np.ndarray | None = None
    estimator_kind: str = "cg"          # "cg" | "rls"
    forgetting_factor: float = 1.0      # RLS only
    drag_model: str = "polar"           # "polar" | "linear"
    channels: str = "full"              # "full" | "reduced"
    fd_rel_step: float = 1e-6

    def __post_init__(self):
        if self.estimator_kind not in ("cg", "rls"):
            raise FormatError(f"unknown estimator kind {self.estimator_kind!r}")
        if not (0.0 < self.forgetting_factor <= 1.0):
            raise FormatError("forgetting factor must be in (0, 1]")
        if self.channels not in ("full", "reduced"):
            raise FormatError(f"unknown channel selection {self.channels!r}")
        param_names(self.drag_model)

    @property
    def n_params(self) -> int:
        return len(param_names(self.drag_model))

    @property
    def n_channels(self) -> int:
        return 6 if self.channels == "full" else 2

    def p0_matrix(self) -> np.ndarray:
        return self._expand(self.p0, self.n_params, "p0", require_spd=True)

    def r_matrix(self) -> np.ndarray:
        mat = self._expand(self.r, 6, "r", require_spd=False)
        if not np.allclose(mat, np.diag(np.diag(mat))):
            raise FormatError("r must be diagonal")
        if np.any(np.diag(mat) <= 0):
            raise FormatError("r diagonal entries must be positive")
        if self.channels == "reduced":
            return mat[ACCEL_CHANNEL_SLICE, ACCEL_CHANNEL_SLICE]
        return mat

    def theta_start(self) -> np.ndarray:
        if self.theta0 is None:
            return np.zeros(self.n_params)
        theta0 = np.asarray(self.theta0, dtype=float)
        if len(theta0) != self.n_params:
            raise FormatError(
                f"theta0 has {len(theta0)} entries; drag model "
                f"{self.drag_model!r} needs {self.n_params}"
            )
        return theta0.copy()

    @staticmethod
    def _expand(value, size, name, require_spd):
        if np.isscalar(value):
            if value <= 0:
                raise FormatError(f"{name} scale must be positive")
            return np.eye(size) * float(value)
        mat = np.asarray(value, dtype=float)
        if mat.shape != (size, size):
            raise FormatError(f"{name} must be {size}x{size}, got {mat.shape}")
        if not np.allclose(mat, mat.T):
            raise FormatError(f"{name} must be symmetric")
        if require_spd:
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                raise FormatError(f"{name} must be positive definite") from None
        return mat.copy()


@dataclass
class EstimatorTrace:
    """Per-step record of one estimation run."""

    thetas: np.ndarray          # (n_steps, n_params)
    residuals: np.ndarray       # (n_steps, 6)
    gain_norms: np.ndarray      # Frobenius norm of K_k
    s_conds: np.ndarray         # condition estimate of S_k
    param_names: tuple[str, ...]
    config: EstimatorConfig
    flight_id: str = ""
    v0: float | None = None

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1]

    def to_csv(self, path):
        header = (["k"] + [f"theta_{i}" for i in range(self.thetas.shape[1])]
                  + ["e_ax", "e_az", "gain_norm"])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(len(self)):
                row = [k] + [repr(float(x)) for x in self.thetas[k]]
                row += [repr(float(self.residuals[k, 4])),
                        repr(float(self.residuals[k, 5])),
                        repr(float(self.gain_norms[k]))]
                writer.writerow(row)


def _measurement(sample: MeasuredSample) -> np.ndarray:
    return np.array([sample.alpha, sample.q, sample.theta, sample.V,
                     sample.a_x, sample.a_z])


def kalman_gain(jac: np.ndarray, prior_cov: np.ndarray, noise_cov: np.ndarray):
    """Gain K = P H' (H P H' + R)^-1 via an SPD factorization.

    Returns (K, S, cond_estimate).  Raises NumericError when S is
    numerically singular.
    """
    s_mat = jac @ prior_cov @ jac.T + noise_cov
    cond = float(np.linalg.cond(s_mat))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericError(f"innovation covariance condition {cond:.3g} exceeds limit")
    try:
        factor = cho_factor(s_mat, lower=True)
    except np.linalg.LinAlgError:
        raise NumericError("innovation covariance is not positive definite") from None
    gain = cho_solve(factor, jac @ prior_cov).T
    return gain, s_mat, cond


def _model_eval(theta, sample, cfg, ecfg: EstimatorConfig, v0):
    z_hat = predict_vec(theta, sample, cfg, ecfg.drag_model, v0)
    jac = jacobian_vec(theta, sample, cfg, ecfg.drag_model, v0, ecfg.fd_rel_step)
    if ecfg.channels == "reduced":
        return z_hat[ACCEL_CHANNEL_SLICE], jac[ACCEL_CHANNEL_SLICE]
    return z_hat, jac


def cg_step(theta_prev: np.ndarray, sample: MeasuredSample, cfg: AircraftConfig,
            ecfg: EstimatorConfig, v0: float | None = None,
            p0: np.ndarray | None = None, r: np.ndarray | None = None):
    """One constant-gain update.  Returns (theta_new, residual6, K, cond)."""
    p0 = ecfg.p0_matrix() if p0 is None else p0
    r = ecfg.r_matrix() if r is None else r
    z = _measurement(sample)
    z_used = z[ACCEL_CHANNEL_SLICE] if ecfg.channels == "reduced" else z
    z_hat, jac = _model_eval(theta_prev, sample, cfg, ecfg, v0)
    residual = z_used - z_hat
    gain, _, cond = kalman_gain(jac, p0, r)
    theta_new = theta_prev + gain @ residual
    residual6 = np.zeros(6)
    if ecfg.channels == "reduced":
        residual6[ACCEL_CHANNEL_SLICE] = residual
    else:
        residual6 = residual
    return theta_new, residual6, gain, cond


def rls_step(theta_prev: np.ndarray, p_prev: np.ndarray, sample: MeasuredSample,
             cfg: AircraftConfig, ecfg: EstimatorConfig, v0: float | None = None,
             r: np.ndarray | None = None):
    """One exponentially-weighted RLS update.

    Returns (theta_new, P_new, residual6, K, cond).
    """
    lam = ecfg.forgetting_factor
    r = ecfg.r_matrix() if r is None else r
    z = _measurement(sample)
    z_used = z[ACCEL_CHANNEL_SLICE] if ecfg.channels == "reduced" else z
    z_hat, jac = _model_eval(theta_prev, sample, cfg, ecfg, v0)
    residual = z_used - z_hat
    gain, _, cond = kalman_gain(jac, p_prev, lam * r)
    theta_new = theta_prev + gain @ residual
    p_new = (np.eye(len(theta_prev)) - gain @ jac) @ p_prev / lam
    p_new = 0.5 * (p_new + p_new.T)
    try:
        np.linalg.cholesky(p_new)
    except np.linalg.LinAlgError:
        raise NumericError("RLS covariance lost positive definiteness") from None
    residual6 = np.zeros(6)
    if ecfg.channels == "reduced":
        residual6[ACCEL_CHANNEL_SLICE] = residual
    else:
        residual6 = residual
    return theta_new, p_new, residual6, gain, cond


def _run(segment: FlightSegment, cfg: AircraftConfig, ecfg: EstimatorConfig) -> EstimatorTrace:
    segment.validate()
    n = len(segment)
    v0 = float(segment.V[0]) if ecfg.drag_model == "linear" else None
    theta = ecfg.theta_start()
    p0 = ecfg.p0_matrix()
    p0_frozen = p0.copy()
    r = ecfg.r_matrix()
    p_rls = p0.copy()

    thetas = np.zeros((n, ecfg.n_params))
    residuals = np.zeros((n, 6))
    gain_norms = np.zeros(n)
    s_conds = np.zeros(n)

    for k in range(n):
        sample = segment.sample(k)
        try:
            if ecfg.estimator_kind == "cg":
                theta, res6, gain, cond = cg_step(theta, sample, cfg, ecfg, v0,
                                                  p0=p0, r=r)
            else:
                theta, p_rls, res6, gain, cond = rls_step(theta, p_rls, sample,
                                                          cfg, ecfg, v0, r=r)
        except (NumericError, ThrustModelError) as exc:
            raise EstimatorStepError(k, str(exc)) from exc
        thetas[k] = theta
        residuals[k] = res6
        gain_norms[k] = np.linalg.norm(gain)
        s_conds[k] = cond

    if not np.array_equal(p0, p0_frozen):
        raise NumericError("P0 was mutated during a constant-gain run")
    return EstimatorTrace(
        thetas=thetas, residuals=residuals, gain_norms=gain_norms, s_conds=s_conds,
        param_names=param_names(ecfg.drag_model), config=ecfg,
        flight_id=segment.flight_id, v0=v0,
    )


def run_cg_eem(segment: FlightSegment, cfg: AircraftConfig,
               ecfg: EstimatorConfig | None = None) -> EstimatorTrace:
    """Run the constant-gain equation-error estimator over a segment."""
    ecfg = ecfg or EstimatorConfig()
    if ecfg.estimator_kind != "cg":
        ecfg = replace(ecfg, estimator_kind="cg")
    return _run(segment, cfg, ecfg)


def run_rls(segment: FlightSegment, cfg: AircraftConfig,
            ecfg: EstimatorConfig | None = None) -> EstimatorTrace:
    """Run the recursive-least-squares baseline over a segment."""
    ecfg = ecfg or EstimatorConfig(estimator_kind="rls")
    if ecfg.estimator_kind != "rls":
        ecfg = replace(ecfg, estimator_kind="rls")
    return _run(segment, cfg, ecfg)


def identify_segment(segment: FlightSegment, cfg: AircraftConfig,
                     ecfg: EstimatorConfig | None = None,
                     thresholds: "convergence.CvThresholds | None" = None):
    """Full single-segment pipeline: estimate, then assess convergence.

    Returns (trace, ConvergenceReport).
    """
    ecfg = ecfg or EstimatorConfig()
    runner = run_cg_eem if ecfg.estimator_kind == "cg" else run_rls
    trace = runner(segment, cfg, ecfg)
    report = convergence.assess(trace, thresholds)
    return trace, report


@dataclass
class ComparisonRow:
    """Outcome of one estimator variant inside a comparison run."""

    label: str
    ok: bool
    trace: EstimatorTrace | None = None
    report: "convergence.ConvergenceReport | None" = None
    error: str = ""

    @property
    def gain_min_max_ratio(self) -> float | None:
        if self.trace is None:
            return None
        norms = self.trace.gain_norms
        return float(norms.min() / norms.max()) if norms.max() > 0 else None


@dataclass
class ComparisonReport:
    """Side-by-side CG vs RLS runs on one segment."""

    rows: list[ComparisonRow]
    flight_id: str = ""

    def row(self, label: str) -> ComparisonRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def gain_csv(self, path):
        traces = [(r.label, r.trace) for r in self.rows if r.trace is not None]
        n = max(len(t) for _, t in traces)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k"] + [f"gain_{label}" for label, _ in traces])
            for k in range(n):
                row = [k]
                for _, trace in traces:
                    row.append(repr(float(trace.gain_norms[k])) if k < len(trace) else "")
                writer.writerow(row)

    def summary(self) -> dict:
        out = {"flight_id": self.flight_id, "rows": []}
        for row in self.rows:
            entry = {"label": row.label, "ok": row.ok}
            if row.ok and row.trace is not None and row.report is not None:
                entry["gain_min_max_ratio"] = row.gain_min_max_ratio
                entry["final_theta"] = [float(x) for x in row.trace.final_theta]
                entry["verdict"] = row.report.verdict
                entry["cv"] = {rec.name: rec.cv for rec in row.report.records}
            else:
                entry["error"] = row.error
            out["rows"].append(entry)
        return out


def compare_estimators(segment: FlightSegment, cfg: AircraftConfig,
                       base_ecfg: EstimatorConfig | None = None,
                       rls_lambdas: tuple[float, ...] = (1.0, 0.95)) -> ComparisonReport:
    """Run CG and RLS variants on the identical segment.

    Individual run failures are recorded and the comparison proceeds
    with the survivors.
    """
    base = base_ecfg or EstimatorConfig()
    variants = [("cg", replace(base, estimator_kind="cg"))]
    for lam in rls_lambdas:
        variants.append((f"rls_{lam:.2f}",
                         replace(base, estimator_kind="rls", forgetting_factor=lam)))
    rows = []
    for label, ecfg in variants:
        try:
            trace, report = identify_segment(segment, cfg, ecfg)
            rows.append(ComparisonRow(label=label, ok=True, trace=trace, report=report))
        except (NumericError, EstimatorStepError) as exc:
            rows.append(ComparisonRow(label=label, ok=False, error=str(exc)))
    return ComparisonReport(rows=rows, flight_id=segment.flight_id)


def run_metadata(trace: EstimatorTrace, seed: int | None = None,
                 failure_step: int | None = None) -> dict:
    ecfg = trace.config
    p0 = ecfg.p0_matrix()
    r_full = ecfg._expand(ecfg.r, 6, "r", require_spd=False)
    return {
        "flight_id": trace.flight_id,
        "estimator_kind": ecfg.estimator_kind,
        "drag_model": ecfg.drag_model,
        "channels": ecfg.channels,
        "forgetting_factor": ecfg.forgetting_factor,
        "p0_diag": [float(x) for x in np.diag(p0)],
        "r_diag": [float(x) for x in np.diag(r_full)],
        "theta0": [float(x) for x in ecfg.theta_start()],
        "n_steps": len(trace),
        "seed": seed,
        "failure_step": failure_step,
        "v0": trace.v0,
    }


def save_run_metadata(trace: EstimatorTrace, path, seed: int | None = None):
    with open(path, "w") as fh:
        json.dump(run_metadata(trace, seed=seed), fh, indent=2, sort_keys=True)
        fh.write("\n")
