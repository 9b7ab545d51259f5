"""Exception hierarchy shared by the library and the command line."""


class PiRoughError(Exception):
    """Base class for all library errors."""


class InvalidMultiIndexError(PiRoughError, ValueError):
    pass


class SpecMismatchError(PiRoughError, ValueError):
    pass


class OffGridError(PiRoughError, ValueError):
    pass


class MissingLevelError(PiRoughError, KeyError):
    pass


class PreconditionError(PiRoughError, ValueError):
    """An integrability or Lipschitz precondition does not hold."""


class ConvergenceError(PiRoughError, RuntimeError):
    """An iterative scheme failed to converge.

    ``distances`` carries the logged distances between successive iterates.
    """

    def __init__(self, message, distances=()):
        super().__init__(message)
        self.distances = list(distances)
