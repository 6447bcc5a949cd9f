"""Exception hierarchy shared by every mixlab module."""


class MixlabError(Exception):
    """Base class for all mixlab errors."""


class PreconditionError(MixlabError, ValueError):
    """An input violates a documented precondition.

    ``field`` names the offending input so the CLI can report it.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CapacityError(MixlabError):
    """The requested computation exceeds a configured size cap."""


class UnsupportedOperationError(MixlabError):
    """The operation is not defined for this graph family or kernel."""


class DivergenceError(MixlabError):
    """An iteration failed to reach its target within the step cap."""
