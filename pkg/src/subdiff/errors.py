"""Exception types raised across the package."""


class ResourceError(RuntimeError):
    """A first-passage walk exceeded its step cap."""


class CalibrationError(ValueError):
    """Binomial tree risk-neutral probability left [0, 1]."""


class RegimeError(ValueError):
    """Inputs violate the parameter regime an operation is defined for."""


class UnsupportedOptionError(ValueError):
    pass


class PricerError(RuntimeError):
    """An inner pricer failed on one horizon draw."""

    def __init__(self, index: int, tau: float, cause: BaseException):
        super().__init__(f"pricer failed on draw {index} (tau={tau!r}): {cause}")
        self.index = index
        self.tau = tau


class PdeInstabilityError(ArithmeticError):
    pass
