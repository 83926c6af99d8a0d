"""Exception types shared across the toolkit."""


class LoopLocError(Exception):
    """Base class for all toolkit errors."""


class NonStaticPhase(LoopLocError):
    """Multiphoton detuning is nonzero, so the loop phase drifts in time."""


class DegenerateSteadyState(LoopLocError):
    """The evolution generator has more than one stationary state."""


class NoConvergence(LoopLocError):
    """The steady-state residual did not reach the required tolerance."""


class VanishingDenominator(LoopLocError):
    """The reference-transition population is too small to form a ratio."""


class NoSolution(LoopLocError):
    """The measured ratio lies above the maximum of the ratio curve."""


class ZeroMagnification(LoopLocError):
    """The field geometry is phase matched and carries no position information."""


class AmbiguousBranch(LoopLocError):
    """More than one position candidate falls inside the prior interval."""
