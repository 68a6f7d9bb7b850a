"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a config file or parameter set violates its contract.

    The message names the offending field (e.g. "regions[0].sex").
    """


class CalibrationError(RuntimeError):
    """Raised when intercept calibration cannot reach the target incidence.

    Carries the best incidence that was achievable inside the search bracket.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved
