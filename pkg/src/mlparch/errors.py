"""Exception types raised by mlparch."""


class MlparchError(Exception):
    """Base class for all mlparch errors."""


class DimensionMismatchError(MlparchError, ValueError):
    """An input array does not match the declared (k, d, n) shapes."""


class InfeasibleSpaceError(MlparchError, ValueError):
    """The parameter-space configuration describes an empty feasible set."""


class OptimizationFailure(MlparchError, RuntimeError):
    """Every optimizer start was abandoned; no maximizer is available."""


class FiberPointError(MlparchError, ValueError):
    """An operation that requires a nonzero likelihood-ratio distance was
    called at a point where the candidate and true regression functions
    coincide."""


class UnmatchableParameterError(MlparchError, ValueError):
    """No candidate unit could be matched to one of the true units when
    grouping parameters for the identifiable/non-identifiable split."""


class DegenerateSplitError(MlparchError, ValueError):
    """A group of matched units has zero total output weight, so the
    within-group proportions are undefined."""


class InvalidConfigError(MlparchError, ValueError):
    """A configuration document failed schema validation."""
