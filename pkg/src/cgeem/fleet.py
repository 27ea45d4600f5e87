"""Fleet-level aggregation of converged per-flight parameter estimates."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aeromodel import PARAM_NAMES_POLAR, AeroParameters
from .convergence import ConvergenceReport, ParameterVerdict
from .errors import CgeemError, FormatError


@dataclass
class FlightResult:
    """One flight's identification outcome."""

    flight_id: str
    tail_id: str
    aircraft_type: str
    representative: AeroParameters | None
    report: ConvergenceReport

    @property
    def converged(self) -> bool:
        return self.report.converged and self.representative is not None

    def to_dict(self) -> dict:
        return {
            "flight_id": self.flight_id,
            "tail_id": self.tail_id,
            "aircraft_type": self.aircraft_type,
            "representative": (self.representative.as_dict()
                               if self.representative else None),
            "report": self.report.to_dict(),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict) -> "FlightResult":
        rep = data.get("report", {})
        records = [
            ParameterVerdict(
                name=p["name"], mean=p["mean"], std=p["std"], cv=p["cv"],
                threshold=p["threshold"], passed=p["passed"],
            )
            for p in rep.get("parameters", [])
        ]
        report = ConvergenceReport(
            window_start_index=rep.get("window_start_index", 0),
            records=records,
            verdict=rep.get("verdict", "flagged"),
            representative=(AeroParameters(**rep["representative"])
                            if rep.get("representative") else None),
            flight_id=data.get("flight_id", ""),
        )
        representative = (AeroParameters(**data["representative"])
                          if data.get("representative") else None)
        return cls(
            flight_id=data.get("flight_id", ""),
            tail_id=data.get("tail_id", ""),
            aircraft_type=data.get("aircraft_type", ""),
            representative=representative,
            report=report,
        )

    @classmethod
    def from_json(cls, path) -> "FlightResult":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}: bad result file ({exc})") from None


@dataclass
class ParameterStats:
    count: int
    mean: float
    std: float
    max: float
    min: float


@dataclass
class TypeSummary:
    aircraft_type: str
    flights: int
    stats: dict[str, ParameterStats]
    pearson_r_cd0_cdl: float | None
    histograms: dict[str, "Histogram"]


@dataclass
class FleetSummary:
    types: dict[str, TypeSummary]
    flagged: list[FlightResult]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "types": {
                name: {
                    "flights": ts.flights,
                    "parameters": {
                        p: vars(st) for p, st in ts.stats.items()
                    },
                    "pearson_r_cd0_cdl": ts.pearson_r_cd0_cdl,
                }
                for name, ts in self.types.items()
            },
            "flagged": [
                {"flight_id": r.flight_id,
                 "failing_parameters": r.report.failing_parameters()}
                for r in self.flagged
            ],
            "notes": self.notes,
        }


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray


def histogram(values, bin_count: int) -> Histogram:
    """Equal-width bins over [min, max]; the last bin is right-closed."""
    values = np.asarray(values, dtype=float)
    if bin_count < 1:
        raise FormatError("bin_count must be >= 1")
    if len(values) == 0:
        raise FormatError("histogram needs at least one value")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return Histogram(edges=np.array([lo, hi]),
                         counts=np.array([len(values)]))
    counts, edges = np.histogram(values, bins=bin_count, range=(lo, hi))
    return Histogram(edges=edges, counts=counts)


def sturges_bins(n: int) -> int:
    return max(1, int(np.ceil(np.log2(n))) + 1) if n > 0 else 1


def correlation_cd0_cdl(results) -> float:
    """Pearson correlation between converged C_D0 and C_DL estimates."""
    pairs = [(r.representative.c_d0, r.representative.c_dl)
             for r in results if r.converged]
    if len(pairs) < 3:
        raise FormatError("correlation needs at least 3 converged results")
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        raise CgeemError("zero variance in C_D0 or C_DL; correlation undefined")
    return float(np.corrcoef(x, y)[0, 1])


def aggregate(results) -> FleetSummary:
    """Per-type statistics over converged flights.

    Flagged flights never contribute; aggregation is order-independent
    (inputs are sorted by flight id before reduction).  Types with fewer
    than two converged flights are omitted with a note.
    """
    results = sorted(results, key=lambda r: r.flight_id)
    flagged = [r for r in results if not r.converged]
    converged = [r for r in results if r.converged]

    notes = []
    types: dict[str, TypeSummary] = {}
    by_type: dict[str, list[FlightResult]] = {}
    for result in converged:
        by_type.setdefault(result.aircraft_type, []).append(result)

    for name in sorted(by_type):
        group = by_type[name]
        if len(group) < 2:
            notes.append(f"type {name}: only {len(group)} converged flight(s); omitted")
            continue
        stats = {}
        hists = {}
        for param in PARAM_NAMES_POLAR:
            vals = np.array([getattr(r.representative, param) for r in group])
            stats[param] = ParameterStats(
                count=len(vals), mean=float(vals.mean()),
                std=float(vals.std(ddof=1)), max=float(vals.max()),
                min=float(vals.min()),
            )
            hists[param] = histogram(vals, sturges_bins(len(vals)))
        try:
            pearson = correlation_cd0_cdl(group)
        except (FormatError, CgeemError):
            pearson = None
        types[name] = TypeSummary(aircraft_type=name, flights=len(group),
                                  stats=stats, pearson_r_cd0_cdl=pearson,
                                  histograms=hists)
    return FleetSummary(types=types, flagged=flagged, notes=notes)


@dataclass
class CrossTypeRow:
    aircraft_type: str
    flights: int
    mean_cd0: float
    std_cd0: float
    mean_cdl: float
    std_cdl: float
    tied_with: tuple[str, ...] = ()


def cross_type_compare(summary: FleetSummary) -> list[CrossTypeRow]:
    """Types ordered by mean C_D0, descending; exact ties are flagged."""
    if len(summary.types) < 2:
        raise FormatError("cross-type comparison needs at least two types")
    rows = []
    for name, ts in summary.types.items():
        rows.append(CrossTypeRow(
            aircraft_type=name, flights=ts.flights,
            mean_cd0=ts.stats["c_d0"].mean, std_cd0=ts.stats["c_d0"].std,
            mean_cdl=ts.stats["c_dl"].mean, std_cdl=ts.stats["c_dl"].std,
        ))
    rows.sort(key=lambda r: (-r.mean_cd0, r.aircraft_type))
    for row in rows:
        ties = tuple(o.aircraft_type for o in rows
                     if o is not row and o.mean_cd0 == row.mean_cd0)
        row.tied_with = ties
    return rows


# --- file interfaces ---------------------------------------------------------

def load_results_dir(directory) -> list[FlightResult]:
    paths = sorted(Path(directory).glob("*.json"))
    return [FlightResult.from_json(p) for p in paths]


def write_fleet_outputs(summary: FleetSummary, out_dir):
    """Write fleet_summary.json, fleet_table.csv, histograms and flagged.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "fleet_summary.json", "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(out / "fleet_table.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["aircraft_type", "flights", "mean_cd0", "std_cd0",
                         "mean_cdl", "std_cdl"])
        for name in sorted(summary.types):
            ts = summary.types[name]
            writer.writerow([
                name, ts.flights,
                f"{ts.stats['c_d0'].mean:.4f}", f"{ts.stats['c_d0'].std:.4f}",
                f"{ts.stats['c_dl'].mean:.4f}", f"{ts.stats['c_dl'].std:.4f}",
            ])

    for name in sorted(summary.types):
        ts = summary.types[name]
        for param, hist in ts.histograms.items():
            path = out / f"histogram_{name}_{param}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_left", "bin_right", "count"])
                for i, count in enumerate(hist.counts):
                    writer.writerow([repr(float(hist.edges[i])),
                                     repr(float(hist.edges[i + 1])), int(count)])

    with open(out / "flagged.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flight_id", "failing_parameters"])
        for result in summary.flagged:
            writer.writerow([result.flight_id,
                             ";".join(result.report.failing_parameters())])
