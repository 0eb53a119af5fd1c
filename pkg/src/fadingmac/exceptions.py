"""Exception hierarchy shared by all modules."""


class FadingMacError(Exception):
    """Base class for package errors."""


class DomainError(FadingMacError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(FadingMacError, ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class UnsupportedSizeError(FadingMacError, ValueError):
    """Problem size exceeds what an exact method supports."""


class InfeasibleError(FadingMacError, ValueError):
    """No allocation can meet the requested constraints."""


class NoConvergenceError(FadingMacError, RuntimeError):
    """An iterative solver hit its iteration cap.

    Parameters
    ----------
    message : str
    residuals : sequence of float, optional
        Final constraint residuals, kept for diagnostics.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = None if residuals is None else list(residuals)


class ScenarioError(FadingMacError, ValueError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        text = f"{message} ({', '.join(where)})" if where else message
        super().__init__(text)
        self.key = key
        self.line = line
