class BirthDeathError(Exception):
    """Base class of all errors raised by bdsim computations"""


class OutOfDomainError(BirthDeathError, ValueError):
    """A state lies outside the window on which rates or sequences are defined"""


class DomainError(BirthDeathError, ValueError):
    """An argument lies outside the mathematical domain of an operation"""


class RateValidationError(BirthDeathError, ValueError):
    def __init__(self, message: str = None, states=None):
        super().__init__(message)
        self.states = list(states or [])


class NuPositivityError(BirthDeathError, ValueError):
    def __init__(self, message: str = None, state: int = None):
        super().__init__(message)
        self.state = state


class DegenerateNuError(BirthDeathError, ValueError):
    pass


class NuRangeError(BirthDeathError, ArithmeticError):
    pass


class IncompatibleNuError(BirthDeathError, ValueError):
    def __init__(self, message: str = None, states=None):
        super().__init__(message)
        self.states = list(states or [])


class CrossingInconsistencyError(BirthDeathError, ValueError):
    pass


class BesselAccuracyError(BirthDeathError, ArithmeticError):
    pass


class UnsupportedRatesError(BirthDeathError, ValueError):
    pass


class StiffnessError(BirthDeathError, ArithmeticError):
    pass


class WindowTooSmallError(BirthDeathError, ValueError):
    pass


class GridMismatchError(BirthDeathError, ValueError):
    pass


class RenewalOrderingError(DomainError):
    pass


class ConfigError(BirthDeathError, ValueError):
    def __init__(self, message: str = None, line: int = None, path: str = None, key: str = None):
        location = ''
        if path:
            location += f'{path}:'
        if line:
            location += f'{line}:'
        super().__init__(f'{location} {message}' if location else message)
        self.line = line
        self.path = path
        self.key = key
