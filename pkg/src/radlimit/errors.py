"""Exception hierarchy shared by the solvers and the CLI."""


class RadLimitError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(RadLimitError, ValueError):
    """Bad run configuration: unknown key, unsupported option, invalid value."""


class ContractViolation(RadLimitError, ValueError):
    """An operation was called with arguments that break its precondition."""


class DomainError(RadLimitError, ValueError):
    """Argument outside the mathematical domain (e.g. negative temperature)."""


class StateValidityError(RadLimitError):
    """A fluid state lost positivity of density or internal energy."""


class NumericFailure(RadLimitError):
    """Non-finite values, solver non-convergence and similar breakdowns.

    ``module`` and ``step`` identify where the failure happened so the CLI can
    report it.
    """

    def __init__(self, message, *, module=None, step=None, location=None):
        self.module = module
        self.step = step
        self.location = location
        parts = [message]
        if module is not None:
            parts.append(f"module={module}")
        if step is not None:
            parts.append(f"step={step}")
        if location is not None:
            parts.append(f"location={location}")
        super().__init__(" ".join(parts))


class CFLViolation(RadLimitError):
    """Time step too large for an explicit sub-solver."""

    def __init__(self, message, *, suggested_dt, module=None, step=None):
        self.suggested_dt = float(suggested_dt)
        self.module = module
        self.step = step
        where = "" if module is None else f" [{module}"
        if module is not None:
            where += "" if step is None else f", step {step}"
            where += "]"
        super().__init__(f"{message}{where}; suggested dt <= {self.suggested_dt:.6g}")


# failures that abort a run (as opposed to bad input)
NUMERIC_ERRORS = (NumericFailure, StateValidityError, CFLViolation)
