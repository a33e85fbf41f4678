"""Exception hierarchy shared by every module of the package."""


class TwistflowError(Exception):
    """Base class for all errors raised by twistflow."""


# geometry
class NonPositiveModulus(TwistflowError, ValueError):
    pass


class BadGrid(TwistflowError, ValueError):
    pass


class BidegreeOverflow(TwistflowError, ValueError):
    pass


class WrongBidegree(TwistflowError, ValueError):
    pass


class NonZeroMean(TwistflowError, ValueError):
    pass


# bundles and twists
class ShapeMismatch(TwistflowError, ValueError):
    pass


class UnsupportedParams(TwistflowError, ValueError):
    pass


class TwistMismatch(TwistflowError, ValueError):
    pass


class BundleMismatch(TwistflowError, ValueError):
    pass


# hermitian calculus
class NotHermitian(TwistflowError, ValueError):
    pass


class SpectrumOutOfDomain(TwistflowError, ValueError):
    pass


class Singular(TwistflowError, ValueError):
    pass


class DegenerateMetric(TwistflowError, ValueError):
    pass


# curvature / stability
class BadDegree(TwistflowError, ValueError):
    pass


class NotWeakHE(TwistflowError, ValueError):
    pass


class NotInjective(TwistflowError, ValueError):
    pass


class NoWitnesses(TwistflowError, ValueError):
    pass


# flow
class StepRejected(TwistflowError, RuntimeError):
    pass


class StallDetected(TwistflowError, RuntimeError):
    pass


class SpectralGapTooSmall(TwistflowError, ValueError):
    pass


# lab configuration
class ConfigError(TwistflowError, ValueError):
    pass


class ParseError(ConfigError):
    pass


class UnknownPreset(ConfigError):
    pass


class BadField(ConfigError):
    pass


class IoError(TwistflowError, OSError):
    """Output could not be written."""
