"""Exception types. ConfigError maps to CLI exit 2, NumericError subtypes to exit 3."""


class ConfigError(ValueError):
    """Invalid configuration or artifact reference."""


class NumericError(RuntimeError):
    """Runtime numeric failure."""


class SimulationError(NumericError):
    """Forward simulation failure."""


class CFLViolation(SimulationError):
    """Time step violates the stability bound before stepping starts."""


class SimulationDiverged(SimulationError):
    """Non-finite field values detected during time stepping."""


class RankDeficiencyError(NumericError):
    """Unregularized least-squares system is singular."""


class TrainingDiverged(NumericError):
    """Training loss became non-finite."""
