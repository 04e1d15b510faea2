class InaflError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(InaflError, ValueError):
    pass


class MalformedMessageError(InaflError, ValueError):
    pass


class InfeasibleRateError(InaflError, ValueError):
    pass


class InfeasibleInstanceError(InaflError):
    pass


class MalformedSolutionError(InaflError, ValueError):
    pass


class SizeGuardError(InaflError):
    pass


class ConfigError(InaflError, ValueError):
    pass


class LPInfeasibleError(InaflError):
    pass


class LPUnboundedError(InaflError):
    pass
