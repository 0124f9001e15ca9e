"""Exception types raised across the toolkit."""


class BarrierPairsError(Exception):
    """Base class for all toolkit errors."""


class InvalidModelError(BarrierPairsError):
    """Plant, constraint, or controller data is dimensionally or numerically invalid."""


class EnumerationLimitError(BarrierPairsError):
    """Too many uncertainty directions to enumerate parameter vertices."""


class SynthesisInfeasibleError(BarrierPairsError):
    """No multiplier grid point admitted a feasible barrier pair.

    Carries the per-point solver statuses in ``statuses`` as a list of
    ``(mu_w, mu_vec, status)`` tuples.
    """

    def __init__(self, message, statuses=None):
        super().__init__(message)
        self.statuses = list(statuses) if statuses is not None else []


class RecoveryError(BarrierPairsError):
    """Controller recovery failed (coupling block not positive definite)."""


class VerificationError(BarrierPairsError):
    """A post-hoc certificate check failed.

    ``report`` holds the full certificate report including the failing entries.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DesignInfeasibleError(BarrierPairsError):
    """No multiplier grid point admitted a feasible estimator gain."""

    def __init__(self, message, statuses=None):
        super().__init__(message)
        self.statuses = list(statuses) if statuses is not None else []


class SimulationDivergedError(BarrierPairsError):
    """Closed-loop state became non-finite. ``time`` is the offending instant."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(BarrierPairsError):
    """Configuration file failed schema or cross-reference validation."""


class ArtifactError(BarrierPairsError):
    """Artifact file is malformed or inconsistent with the configuration."""
