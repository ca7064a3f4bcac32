"""Exception hierarchy shared by the solver, oracle and CLI."""


class InfoMenuError(Exception):
    """Base class for all package errors."""


class DomainError(InfoMenuError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnsupportedKindError(InfoMenuError, TypeError):
    """Operation needs a smooth value function but got an action table."""


class ThresholdNotFoundError(InfoMenuError):
    """A threshold equation has no sign change in its bracket."""

    def __init__(self, equation, lo, hi):
        self.equation = equation
        self.bracket = (lo, hi)
        super().__init__(f"no sign change for {equation} on [{lo:.6g}, {hi:.6g}]")


class UnsolvedMultiplierError(InfoMenuError):
    """The multiplier on the integral constraint could not be bracketed."""

    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(message)


class AssumptionRefusal(InfoMenuError):
    """Inputs fail a regularity check and no override was given."""

    def __init__(self, reports):
        self.reports = list(reports)
        names = ", ".join(r.condition for r in self.reports)
        super().__init__(f"assumption check failed: {names}")


class InfeasibleFamilyError(DomainError):
    """A dispersion parameter makes the density negative somewhere."""

    def __init__(self, t, t_max):
        self.t = t
        self.t_max = t_max
        super().__init__(f"t={t:.6g} makes the density negative; max feasible t is {t_max:.10g}")


class BudgetExceededError(InfoMenuError):
    """Exhaustive enumeration is over budget and fallback is disabled."""


class ConfigError(InfoMenuError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{' '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SchemaError(InfoMenuError):
    """A menu or mechanism file does not match the expected layout."""
