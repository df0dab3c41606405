"""Exception types shared across the package."""


class SPCLError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateInputError(SPCLError, ValueError):
    """A vector has zero norm, or geometry makes a quantity undefined."""


class StructuralError(SPCLError, ValueError):
    """Shapes, dimensions or labels do not line up."""


class ConfigError(SPCLError, ValueError):
    """Invalid configuration value."""


class EmptyQueueError(SPCLError, LookupError):
    """A support set was requested from an empty class queue."""


class BatchTooSmallError(SPCLError, ValueError):
    """A contrastive loss needs at least two samples."""


class EvaluationError(SPCLError, ArithmeticError):
    """A function under evaluation returned a non-finite value."""
