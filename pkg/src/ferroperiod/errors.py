"""Exception hierarchy for the solver stack."""


class FerroError(Exception):
    """Base class for every error raised by :mod:`ferroperiod`."""


class ConfigError(FerroError, ValueError):
    """Configuration text could not be parsed or failed validation."""


class CompatibilityError(FerroError, ValueError):
    """Data violates a solvability condition (zero mean, periodicity, sign)."""


class MaxPrincipleError(FerroError):
    """Temperature left the admissible band ``0 <= tau_tilde + zeta <= tau_star``."""


class CFLError(FerroError):
    """Explicit advection time step is too large for the current velocity."""


class ConvergenceError(FerroError):
    """An iterative solver hit its iteration cap or stagnated."""
