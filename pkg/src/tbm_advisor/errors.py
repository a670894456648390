"""Exception hierarchy shared across the package.

Every error that a pipeline stage can raise has its own class so that the
CLI can map failure classes to stable exit codes and the HTTP service can
map them to status codes.
"""

from __future__ import annotations


class AdvisorError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


# --- record / domain validation -------------------------------------------

class NonFiniteError(AdvisorError):
    """A NaN or infinite value where a finite number is required."""

    exit_code = 10


class ArityMismatchError(AdvisorError):
    """A control/context vector has the wrong number of entries."""

    exit_code = 11


class NegativeMeasureError(AdvisorError):
    """Advance rate or working pressure below zero."""

    exit_code = 12


class InvalidConfigError(AdvisorError):
    """An optimality or training configuration violates its invariants."""

    exit_code = 13


# --- ingestion --------------------------------------------------------------

class SchemaMismatchError(AdvisorError):
    """CSV header does not match the configured schema."""

    exit_code = 20


class ParseError(AdvisorError):
    """A CSV cell could not be parsed; carries row and column."""

    exit_code = 21

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyAfterCleansingError(AdvisorError):
    """Cleansing removed every sample."""

    exit_code = 22


class NonUniformSamplingError(AdvisorError):
    """Sample spacing within a segment deviates more than the tolerance."""

    exit_code = 23


class ZeroVarianceError(AdvisorError):
    """A feature channel is constant and cannot be standardized."""

    exit_code = 24

    def __init__(self, message, channel=None):
        super().__init__(message)
        self.channel = channel


class UnimodalError(AdvisorError):
    """No valley found between two modes in the fluctuation histogram."""

    exit_code = 25


class InsufficientDataError(AdvisorError):
    """Not enough records to fit a configuration or model."""

    exit_code = 26


# --- model training / inference ---------------------------------------------

class DimensionMismatchError(AdvisorError):
    """Input vector does not match the model's input dimension."""

    exit_code = 30


class NonFiniteLossError(AdvisorError):
    """Training loss became NaN/inf; carries the epoch index."""

    exit_code = 31

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class EmptyGridError(AdvisorError):
    """Grid search invoked with an empty hyperparameter grid."""

    exit_code = 32


# --- nearest neighbors -------------------------------------------------------

class TooFewPointsError(AdvisorError):
    """Index has fewer points than required."""

    exit_code = 40


class KExceedsIndexError(AdvisorError):
    """A query asked for more neighbors than the index holds."""

    exit_code = 41


class NoSuccessorError(AdvisorError):
    """A neighbor has no consecutive observation in its segment."""

    exit_code = 42


class TooFewEligibleNeighborsError(AdvisorError):
    """Fewer than the required number of successor-bearing neighbors."""

    exit_code = 43


# --- advisor registry --------------------------------------------------------

class UnknownGroundClassError(AdvisorError):
    """Ground class label not one of GC1/GC2/GC3."""

    exit_code = 50


class ModelNotLoadedError(AdvisorError):
    """No model loaded for the requested ground class."""

    exit_code = 51


class MissingModelError(AdvisorError):
    """Model directory lacks a required per-ground-class file."""

    exit_code = 52

    def __init__(self, message, ground_class=None):
        super().__init__(message)
        self.ground_class = ground_class


class FingerprintMismatchError(AdvisorError):
    """Model was trained on a different corpus than the one supplied."""

    exit_code = 53


# --- simulator ----------------------------------------------------------------

class InvalidSpecError(AdvisorError):
    """Drive specification violates its invariants."""

    exit_code = 60


class SessionClosedError(AdvisorError):
    """Operation on a simulator session that was already closed."""

    exit_code = 61


# --- validation ----------------------------------------------------------------

class NoActionsError(AdvisorError):
    """Validation set contains no operator action for a control parameter."""

    exit_code = 70
