"""Exception hierarchy shared by the library and the CLI.

Every error carries an ``exit_code`` so the command-line front end can map
failures onto its documented categories (2 config, 3 divergence, 4 oracle).
"""


class MetdError(Exception):
    exit_code = 1


class DimensionError(MetdError, ValueError):
    exit_code = 2


class NumericRangeError(MetdError, ArithmeticError):
    exit_code = 3


class DegenerateProblemError(MetdError, ValueError):
    exit_code = 2


class OracleFailureError(MetdError, RuntimeError):
    exit_code = 4


class BootstrapError(MetdError, RuntimeError):
    """A multistep scheme was asked to step without its history."""

    exit_code = 2


class DivergenceError(MetdError, ArithmeticError):
    exit_code = 3

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"non-finite state at step {step_index}")


class BudgetError(MetdError, ValueError):
    exit_code = 2


class PaddingViolationError(MetdError, RuntimeError):
    exit_code = 3


class ConfigError(MetdError, ValueError):
    exit_code = 2


class ExcludedModeError(MetdError, ValueError):
    """The zonal-mean mode kx = 0 is not part of the fluctuation system."""

    exit_code = 2
