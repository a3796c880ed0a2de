"""Exception hierarchy shared by every slekan module."""


class SlekanError(Exception):
    """Base class for all library errors."""


class DomainError(SlekanError, ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleStrainError(DomainError):
    """Requested strain is at or beyond the strain limit of the material."""

    def __init__(self, strain, strain_limit):
        self.strain = strain
        self.strain_limit = strain_limit
        super().__init__(
            f"strain {strain!r} is not below the strain limit {strain_limit!r}"
        )


class ModeError(SlekanError, ValueError):
    """Operation is not defined for the spline model's mode."""


class CalibrationError(SlekanError, RuntimeError):
    """Every calibration restart ended at an infeasible parameter set."""

    def __init__(self, message, diagnostics=()):
        self.diagnostics = list(diagnostics)
        lines = [message] + [f"  restart {d['restart']}: {d}" for d in self.diagnostics]
        super().__init__("\n".join(lines))


class ParseError(SlekanError, ValueError):
    """A data, config or report file could not be parsed."""

    def __init__(self, path, line, column, message):
        self.path = str(path)
        self.line = line
        self.column = column
        super().__init__(f"{self.path}:{line}:{column}: {message}")


class ValidationError(SlekanError, ValueError):
    """A parsed file violates a schema invariant."""

    def __init__(self, path, row, message):
        self.path = str(path)
        self.row = row
        super().__init__(f"{self.path}: row {row}: {message}")
