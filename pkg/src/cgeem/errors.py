"""Exception hierarchy for the cgeem package."""


class CgeemError(Exception):
    """Base class for all cgeem errors."""


class SchemaError(CgeemError):
    """A mandatory channel is missing or the file header does not match the schema."""


class FormatError(CgeemError):
    """Malformed input data (non-monotone timestamps, bad values, bad config)."""


class GapError(CgeemError):
    """A channel has a gap longer than twice its native sample period."""

    def __init__(self, channel: str, start: float, end: float):
        self.channel = channel
        self.start = start
        self.end = end
        super().__init__(
            f"channel {channel}: gap of {end - start:.3f} s between "
            f"t={start:.3f} and t={end:.3f} exceeds twice the native period"
        )


class NumericError(CgeemError):
    """Numerical failure inside an estimator or model evaluation."""


class ThrustModelError(NumericError):
    """TSFC evaluated to a non-positive value; thrust model is singular."""


class EstimatorStepError(NumericError):
    """A recursive update step failed; carries the failing step index."""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


class DegenerateMeanError(CgeemError):
    """Coefficient of variation is undefined because |mean| is ~ zero."""
