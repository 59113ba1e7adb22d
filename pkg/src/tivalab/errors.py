"""Exception types raised by tivalab."""


class TivaLabError(Exception):
    """Base class for every error raised on purpose by this package."""


class ParameterDomainError(TivaLabError, ValueError):
    """A PK/PD parameter or tuning constant lies outside its valid domain."""


class InputDomainError(TivaLabError, ValueError):
    """An infusion rate lies outside [0, u_max]."""


class CovarianceDegeneracyError(TivaLabError, ArithmeticError):
    """The EKF innovation covariance is not strictly positive."""


class ConfigError(TivaLabError, ValueError):
    """A configuration file could not be read or failed validation."""

    def __init__(self, message, issues=None):
        super().__init__(message)
        self.issues = list(issues or [])
