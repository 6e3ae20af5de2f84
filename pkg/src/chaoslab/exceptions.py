"""Exception types raised by chaoslab."""


class ChaosLabError(Exception):
    """Base class for all chaoslab errors."""


class EigenFailure(ChaosLabError):
    pass


class DimensionMismatch(ChaosLabError, ValueError):
    pass


class RankError(ChaosLabError, ValueError):
    pass


class NotPureChaos(ChaosLabError, ValueError):
    pass


class GridTooCoarse(ChaosLabError):
    """The inversion grid truncates mass or tails beyond tolerance."""


class QuadratureFailure(ChaosLabError):
    pass


class EmbeddingFailure(ChaosLabError):
    pass


class InsufficientData(ChaosLabError, ValueError):
    pass
