"""Exception types shared across the package."""


class LoadforgeError(Exception):
    """Base class for all loadforge errors."""


class InvalidInputError(LoadforgeError):
    """Input data violates a precondition (non-finite values, bad shapes, ...)."""


class ConvergenceError(LoadforgeError):
    """An iterative solver hit its iteration cap. Carries the best iterate."""

    def __init__(self, message, best=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


class DegenerateActivationsError(LoadforgeError):
    """Activation Gram matrix is rank deficient beyond ridge rescue."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class NormalizationError(LoadforgeError):
    """A signature cannot be rescaled to unit power projection."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class SpecificationError(LoadforgeError):
    """A device/category/building spec is inconsistent."""


class ParseError(LoadforgeError):
    """A dataset file does not match its declared format."""

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.path = path
        self.line = line


class GapError(ParseError):
    """A power series has a missing or irregular timestep."""

    def __init__(self, message, path=None, line=None, timestamp=None):
        super().__init__(message, path=path, line=line)
        self.timestamp = timestamp
