"""Exception hierarchy shared across the library and the CLI exit codes."""


class SubseriesLabError(Exception):
    """Base class for all library errors."""


class InvalidParamsError(SubseriesLabError):
    """Malformed parameters, selectors, or configuration records."""


class InsufficientHorizonError(SubseriesLabError):
    """A search ran out of horizon before the required object was found.

    ``context`` carries the failing index (e.g. the interval-length index k
    whose run was not found) when one exists.
    """

    def __init__(self, message: str, context=None):
        super().__init__(message)
        self.context = context


class UnsupportedIdealError(SubseriesLabError):
    """The requested operation is not defined for this ideal kind."""


class RejectedInputError(SubseriesLabError):
    """An input object failed a precondition check (e.g. a witness that is not small)."""


class NoFailureFoundError(SubseriesLabError):
    """No Cauchy failure with positive margin exists within the search horizon."""
