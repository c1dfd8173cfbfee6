"""Exception types raised across the package.

Each error named by the pipeline contracts gets its own class so callers
(and the CLI) can report a categorized failure.
"""


class SwarmImputeError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SwarmImputeError, ValueError):
    pass


# dataset
class BadMagic(SwarmImputeError):
    pass


class TruncatedFile(SwarmImputeError):
    pass


class LabelOutOfRange(SwarmImputeError, ValueError):
    pass


class IndivisibleCount(SwarmImputeError, ValueError):
    pass


class LabelMismatch(SwarmImputeError, ValueError):
    pass


class RateOutOfRange(SwarmImputeError, ValueError):
    pass


class TooFewFeatures(SwarmImputeError, ValueError):
    pass


# rbm / deepnet
class TooLargeToEnumerate(SwarmImputeError):
    pass


class DimensionChainBroken(SwarmImputeError, ValueError):
    pass


class Divergence(SwarmImputeError, ArithmeticError):
    pass


class LineSearchFailure(SwarmImputeError):
    pass


# firefly / imputer
class ObjectiveNonFinite(SwarmImputeError, ArithmeticError):
    pass


class LengthMismatch(SwarmImputeError, ValueError):
    pass


# evaluate
class EmptyReport(SwarmImputeError, ValueError):
    pass


class RowSetMismatch(SwarmImputeError, ValueError):
    pass


# modelstore
class ChecksumMismatch(SwarmImputeError):
    pass


class UnsupportedVersion(SwarmImputeError):
    pass


class ShapeMismatch(SwarmImputeError):
    pass
