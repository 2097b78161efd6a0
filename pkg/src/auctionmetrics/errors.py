"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems (bad parameters,
malformed inputs) exit 2, estimator failures exit 3, I/O problems exit 4.
"""


class AuctionMetricsError(Exception):
    """Base class for all package errors."""


class ValidationError(AuctionMetricsError, ValueError):
    """Invalid parameters, domains, or malformed input data."""


class EstimationError(AuctionMetricsError, RuntimeError):
    """An estimator could not produce a usable result.

    Instances may carry a ``diagnostics`` dict with partial results.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
