"""Exception types shared across the package."""


class WavedmdError(Exception):
    """Base class for all wavedmd errors."""


class ZeroVarianceError(WavedmdError):
    """A variable is constant on the segment used to compute statistics."""

    def __init__(self, variable: str, message: str | None = None):
        self.variable = variable
        super().__init__(message or f"variable {variable!r} has zero variance on the segment")


class OutOfBoundsError(WavedmdError):
    """A window (plus its lead) does not fit inside the record."""


class NoValidWindowError(WavedmdError):
    """The record is too short to place even one window."""


class InsufficientHistoryError(WavedmdError):
    """Not enough leading samples to build derivative or shift blocks."""


class EmptyWindowError(WavedmdError):
    """Fewer than two snapshots; no snapshot pair can be formed."""


class DegenerateDataError(WavedmdError):
    """All singular values of the snapshot matrix fall below the rank threshold."""


class EigFailureError(WavedmdError):
    """The eigendecomposition did not converge."""


class DegenerateAmplitudesError(WavedmdError):
    """All modal amplitudes vanish; participation is undefined."""


class AllZeroError(WavedmdError):
    """Both predicted and measured series are identically zero for a variable."""


class DimensionMismatchError(WavedmdError):
    """Operands disagree on state dimension or variable names."""


class MissingCellError(WavedmdError):
    """The requested configuration cell is absent from the report."""


class ConfigInfeasibleError(WavedmdError):
    """No window fits the record for the requested configuration."""


class CsvFormatError(WavedmdError):
    """The CSV file violates the expected record layout."""


class ModelFormatError(WavedmdError):
    """The model file cannot be parsed back into a model."""
