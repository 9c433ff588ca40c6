"""Solver failure modes shared across the package."""


class FqhdError(Exception):
    """Base class for solver failures."""


class SupersonicRegimeError(FqhdError):
    """The current-voltage relation has no subsonic root (discriminant < 0)."""


class IterationLimitError(FqhdError):
    """A Newton or fixed-point loop hit its iteration cap before converging."""


class OutOfRegimeError(FqhdError):
    """Converged outside the small-boundary-strength theory (truncation active
    or post-solve bounds violated)."""


class LinearSolveError(FqhdError):
    """A linear subsystem was singular or numerically unsolvable."""


class VacuumError(FqhdError):
    """The density dropped below the vacuum guard during time integration."""
