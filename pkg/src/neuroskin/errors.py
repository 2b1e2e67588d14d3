"""Exception types shared across the package."""


class NeuroSkinError(Exception):
    """Base class for package-specific failures."""


class ConfigError(NeuroSkinError):
    """Configuration file missing, malformed, or inconsistent."""


class AssemblyRankError(NeuroSkinError):
    """Constrained global stiffness is singular (insufficient supports)."""


class SimulationDivergedError(NeuroSkinError):
    """Time integration produced a non-finite state."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"simulation diverged at step {step}")


class EvaluationError(NeuroSkinError):
    """An objective evaluation failed; carries the perturbation index."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"evaluation failed for perturbation index {index}")
