"""Exception types shared across the package."""


class MJPError(Exception):
    """Base class for every error raised by this package."""


class NegativeOffDiagonal(MJPError):
    """Rate matrix has a negative off-diagonal entry."""


class BadRowSum(MJPError):
    """Rate matrix row does not sum to zero within tolerance."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class NotIrreducible(MJPError):
    """Positive-rate digraph of the rate matrix is not strongly connected."""


class TimeOutOfWindow(MJPError):
    """A query or observation time lies outside [t_min, t_max]."""


class LambdaTooSmall(MJPError):
    """Uniformization intensity must strictly exceed the maximal leaving rate."""


class ImpossibleEvidence(MJPError):
    """Evidence has probability zero under the current model/grid."""


class InitFailed(MJPError):
    """Chain initialization could not produce an evidence-consistent trajectory."""


class TooLarge(MJPError):
    """Instance exceeds the hard cap of an exact (enumerative) computation."""


class RejectionStalled(MJPError):
    """Rejection sampler exhausted its iteration cap without an acceptance."""


class ZeroProbabilityConditioning(MJPError):
    """Conditioning event has probability zero under the skeleton chain."""


class SeedTrajectoryInfeasible(MJPError):
    """The deterministic seed trajectory is inconsistent with the evidence."""


class DimensionMismatch(MJPError):
    """Distributions have different support sizes."""


class TraceTooShort(MJPError):
    """Trace has too few sweeps for the requested burn-in."""


class ParseError(MJPError):
    """Input file could not be parsed."""


class ValidationError(MJPError):
    """Input file parsed but failed schema or domain validation.

    ``pointer`` is a JSON-pointer-style path to the offending field.
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer
