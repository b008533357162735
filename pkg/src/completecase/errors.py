"""Exception types raised across the package."""


class ArgumentError(ValueError):
    """Malformed or inconsistent arguments (dimension mismatch, unknown names)."""


class DataFormatError(ArgumentError):
    """A dataset file violates the CSV schema; message names the row and column."""


class UnderIdentifiedError(ArgumentError):
    """Fewer complete cases than parameters."""


class SingularityError(ArithmeticError):
    """A matrix that must be inverted is (numerically) singular."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class SummaryError(RuntimeError):
    """Every replication failed for some method, so nothing can be aggregated."""

    def __init__(self, message, method=None):
        super().__init__(message)
        self.method = method


class GraphError(ArgumentError):
    """Invalid DAG construction (cycle, self-loop) or query."""
