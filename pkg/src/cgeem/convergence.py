"""Convergence-window statistics and tiered coefficient-of-variation tests.

The first 60% of a trace is discarded as transient; each parameter's CV
over the remaining window is tested against its group threshold (1% for
lift parameters, 10% for drag, 1% for the thrust slope).  A flight where
any parameter fails is flagged for manual inspection rather than entering
fleet aggregates.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .aeromodel import PARAM_NAMES_POLAR, AeroParameters
from .errors import DegenerateMeanError, FormatError

MIN_TRACE_LENGTH = 50
DEGENERATE_MEAN = 1e-12

LIFT_PARAMS = ("c_l0", "c_l_alpha", "c_lm")
DRAG_PARAMS = ("c_d0", "c_dl", "c_dv", "c_d_alpha")
THRUST_PARAMS = ("c_tv",)


@dataclass(frozen=True)
class CvThresholds:
    """CV acceptance thresholds per parameter group."""

    lift: float = 0.01
    drag: float = 0.10
    thrust: float = 0.01

    def for_param(self, name: str) -> float:
        if name in LIFT_PARAMS:
            return self.lift
        if name in DRAG_PARAMS:
            return self.drag
        if name in THRUST_PARAMS:
            return self.thrust
        raise FormatError(f"no threshold group for parameter {name!r}")


@dataclass(frozen=True)
class ParameterVerdict:
    name: str
    mean: float
    std: float
    cv: float | None            # None when |mean| is degenerate
    threshold: float
    passed: bool


@dataclass
class ConvergenceReport:
    window_start_index: int
    records: list[ParameterVerdict]
    verdict: str                # "converged" | "flagged"
    representative: AeroParameters | None = None
    flight_id: str = ""

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"

    def representative_values(self) -> dict[str, float]:
        return {rec.name: rec.mean for rec in self.records}

    def failing_parameters(self) -> list[str]:
        return [rec.name for rec in self.records if not rec.passed]

    def to_dict(self) -> dict:
        return {
            "flight_id": self.flight_id,
            "window_start_index": self.window_start_index,
            "verdict": self.verdict,
            "parameters": [
                {
                    "name": rec.name,
                    "mean": rec.mean,
                    "std": rec.std,
                    "cv": rec.cv,
                    "threshold": rec.threshold,
                    "passed": rec.passed,
                }
                for rec in self.records
            ],
            "representative": (self.representative.as_dict()
                               if self.representative is not None else None),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def convergence_window(trace_len: int) -> tuple[int, int]:
    """[start, end) indices of the convergence window (last 40% of steps).

    The cut index is ceil(0.6 * N), computed in exact integer arithmetic.
    """
    if trace_len < MIN_TRACE_LENGTH:
        raise FormatError(
            f"trace of {trace_len} steps is too short; need >= {MIN_TRACE_LENGTH}"
        )
    start = -((-6 * trace_len) // 10)   # ceil(6 N / 10)
    return start, trace_len


def coefficient_of_variation(series) -> float:
    """Sample standard deviation over |mean|."""
    series = np.asarray(series, dtype=float)
    if len(series) < 2:
        raise FormatError("CV requires at least two values")
    mean = float(series.mean())
    if abs(mean) <= DEGENERATE_MEAN:
        raise DegenerateMeanError(
            f"|mean| = {abs(mean):.3g} too small for a meaningful CV"
        )
    return float(series.std(ddof=1)) / abs(mean)


def assess(trace, thresholds: CvThresholds | None = None) -> ConvergenceReport:
    """Apply the window split and per-parameter CV tests to a trace.

    A degenerate window mean flags the parameter instead of raising.
    """
    thresholds = thresholds or CvThresholds()
    n = len(trace)
    start, end = convergence_window(n)
    window = trace.thetas[start:end]

    records = []
    for j, name in enumerate(trace.param_names):
        series = window[:, j]
        mean = float(series.mean())
        std = float(series.std(ddof=1))
        threshold = thresholds.for_param(name)
        try:
            cv = coefficient_of_variation(series)
            passed = cv < threshold
        except DegenerateMeanError:
            cv = None
            passed = False
        records.append(ParameterVerdict(name=name, mean=mean, std=std, cv=cv,
                                        threshold=threshold, passed=passed))

    converged = all(rec.passed for rec in records)
    representative = None
    if converged and tuple(trace.param_names) == PARAM_NAMES_POLAR:
        representative = AeroParameters.from_array([rec.mean for rec in records])
    return ConvergenceReport(
        window_start_index=start,
        records=records,
        verdict="converged" if converged else "flagged",
        representative=representative,
        flight_id=trace.flight_id,
    )


def write_flagged_manifest(reports, path):
    """Write flagged flights (flight_id, failing parameters) to a CSV manifest."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flight_id", "failing_parameters"])
        for report in reports:
            if not report.converged:
                writer.writerow([report.flight_id, ";".join(report.failing_parameters())])
