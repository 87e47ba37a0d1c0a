"""Exception types raised across the package."""


class MagNavError(Exception):
    """Base class for all package errors."""


class InvalidArgument(MagNavError, ValueError):
    pass


class OutOfBounds(MagNavError, ValueError):
    """A map query (or its finite-difference stencil) left the map extent."""


class MalformedMap(MagNavError, ValueError):
    pass


class DegenerateWeights(MagNavError, RuntimeError):
    """Every particle ended up with zero likelihood."""


class AmbiguousHeading(MagNavError, ValueError):
    """Circular mean of particle headings is undefined."""


class DegenerateBelief(MagNavError, RuntimeError):
    """Belief grid lost all of its probability mass."""


class NoFeasiblePlan(MagNavError, RuntimeError):
    """Every candidate action sequence leaves the map."""


class ConfigError(MagNavError, ValueError):
    pass


class SimulationError(MagNavError, RuntimeError):
    """Runtime failure inside a closed-loop run, tagged with the step index."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
