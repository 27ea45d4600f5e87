"""Constant-gain equation-error identification of airliner aerodynamics.

Library layout:

``channels`` / ``flightdata``
    Recorder channel schema, raw CSV ingestion, unit conversion,
    multi-rate alignment and cruise-segment detection.
``aeromodel``
    Lift/drag/thrust measurement model and its parameter Jacobian.
``estimator``
    Constant-gain update, RLS baseline and comparison runs.
``convergence``
    Window split, coefficient-of-variation tests, representative values.
``simgen``
    Pseudo-recorder generation with known ground truth.
``fleet``
    Aggregation of converged per-flight results into fleet statistics.
``cli``
    Command-line pipeline over the file formats above.
"""

__version__ = "0.1.0"

from .aeromodel import (
    AeroParameters,
    AircraftConfig,
    AltDragParameters,
    ModelInputs,
    drag_coefficient_linear,
    drag_coefficient_polar,
    forces,
    jacobian,
    lift_coefficient,
    load_aircraft_config,
    predict_accelerations,
    predict_measurement,
    thrust,
)
from .channels import MANDATORY_CHANNELS, QAR_SCHEMA, ChannelSpec
from .convergence import (
    ConvergenceReport,
    CvThresholds,
    assess,
    coefficient_of_variation,
    convergence_window,
)
from .errors import (
    CgeemError,
    DegenerateMeanError,
    EstimatorStepError,
    FormatError,
    GapError,
    NumericError,
    SchemaError,
    ThrustModelError,
)
from .estimator import (
    ComparisonReport,
    EstimatorConfig,
    EstimatorTrace,
    cg_step,
    compare_estimators,
    identify_segment,
    rls_step,
    run_cg_eem,
    run_rls,
)
from .flightdata import (
    CruiseCriteria,
    FlightSegment,
    MeasuredSample,
    RawChannelTable,
    align_and_convert,
    derive_mach,
    detect_cruise_segments,
    load_segment,
)
from .fleet import (
    FleetSummary,
    FlightResult,
    aggregate,
    correlation_cd0_cdl,
    cross_type_compare,
    histogram,
)
from .simgen import (
    A321_FLEET_MEANS,
    CruiseProfile,
    NoiseSpec,
    SimScenario,
    add_noise,
    noise_sweep,
    reference_scenario,
    simulate_segment,
    synth_forces,
    synth_trajectory,
)
