"""Exception hierarchy for the toolkit.

Every error raised by the library derives from :class:`KFPError`, so callers
can catch library failures with a single ``except`` clause.
"""

__all__ = [
    "KFPError",
    "DimensionMismatch",
    "NonSymmetricQ",
    "NegativeEigenvalueQ",
    "SingularGramian",
    "OverflowRegime",
    "UnsupportedBackend",
    "UnboundedSupport",
    "TraceConditionViolated",
    "NonIntegrableTail",
    "DivergentTail",
    "SlowSmallTimeDecay",
    "MonotonicityViolation",
    "InvalidDRequest",
    "RegimeMismatch",
    "BadExponents",
    "ParseError",
    "ValidationError",
    "IoError",
]


class KFPError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(KFPError):
    """Matrix or vector dimensions are inconsistent."""


class NonSymmetricQ(KFPError):
    """The diffusion matrix is not symmetric within tolerance."""


class NegativeEigenvalueQ(KFPError):
    """The diffusion matrix has an eigenvalue below -tolerance."""


class SingularGramian(KFPError):
    """The covariance integral C(t) is not positive definite.

    Signals either a failure of the rank condition or a time so small that
    the factorization underflows.
    """


class OverflowRegime(KFPError):
    """exp(tB) or the covariance integral overflowed double precision."""


class UnsupportedBackend(KFPError):
    """The requested method does not support this field backend."""


class UnboundedSupport(KFPError):
    """Quadrature requested for a field without a bounded support hint."""


class TraceConditionViolated(KFPError):
    """Operation requires tr B >= 0 for L^1 contractivity of the semigroup."""


class NonIntegrableTail(KFPError):
    """The large-time integrand does not admit a certified tail bound."""


class DivergentTail(KFPError):
    """Riesz-type potential diverges: intrinsic dimension at infinity <= 2s."""


class SlowSmallTimeDecay(KFPError):
    """Fitted small-time decay of the heat-content deficit is too slow.

    The time integral defining the perimeter may diverge; the set is
    reported as irregular instead of returning a number.
    """


class MonotonicityViolation(KFPError):
    """A sequence required to be monotone violated it beyond quadrature noise."""


class InvalidDRequest(KFPError):
    """Requested growth exponent D lies outside [d_zero, d_infinity]."""


class RegimeMismatch(KFPError):
    """Embedding check invoked for the wrong volume-growth regime."""


class BadExponents(KFPError):
    """Sum-space exponents must satisfy q_inf > q0 > 1."""


class ParseError(KFPError):
    """Scenario file could not be parsed; message names the offending field."""


class ValidationError(KFPError):
    """Scenario contents are structurally valid but semantically wrong."""


class IoError(KFPError):
    """Report emission failed."""
