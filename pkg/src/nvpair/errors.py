"""Exception types raised by the simulation modules."""


class NVPairError(Exception):
    """Base class for all model/runtime errors of the package."""


class InvalidArgument(NVPairError, ValueError):
    pass


class CapacityError(NVPairError):
    """Hilbert space larger than the dense solvers are meant for."""


class BracketingError(NVPairError):
    pass


class FitFailure(NVPairError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateModelError(NVPairError):
    pass


class UndefinedPolarization(NVPairError, ValueError):
    pass


class CalibrationError(NVPairError):
    pass


class ConfigError(NVPairError):
    """Bad experiment configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
