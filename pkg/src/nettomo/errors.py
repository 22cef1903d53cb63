"""Exception types shared across the package."""


class TomographyError(Exception):
    """Base class for all errors raised by nettomo."""


class NodeNotFound(TomographyError, KeyError):
    pass


class MetricIncomplete(TomographyError, KeyError):
    pass


class InvalidTree(TomographyError, ValueError):
    pass


class TooFewLeaves(TomographyError, ValueError):
    pass


class LabelMismatch(TomographyError, ValueError):
    pass


class ParseError(TomographyError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class InvalidRate(TomographyError, ValueError):
    pass


class InvalidLength(TomographyError, ValueError):
    pass


class DegenerateDistribution(TomographyError, ValueError):
    pass


class SingularTransition(TomographyError, ValueError):
    pass


class PermutationLike(TomographyError, ValueError):
    pass


class InvalidCoefficients(TomographyError, ValueError):
    pass


class ZeroCountError(TomographyError, ValueError):
    def __init__(self, pair: tuple[str, str]):
        super().__init__(f"zero count for terminal pair {pair[0]!r}, {pair[1]!r}")
        self.pair = pair


class TopologyMismatch(TomographyError, ValueError):
    pass
