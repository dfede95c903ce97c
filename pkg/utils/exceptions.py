"""
Exceptions module.
Error types raised across the suite.
"""


class SafeNetError(Exception):
    """Base class for all suite errors."""


class MissingDerivativeError(SafeNetError, KeyError):
    """A residual read a derivative the bundle does not carry."""


class UnsupportedDerivativeError(SafeNetError, ValueError):
    """A derivative was requested that the network inputs cannot supply."""


class OutOfDomainError(SafeNetError, ValueError):
    """A point lies outside the problem's domain box."""


class OracleConvergenceError(SafeNetError, RuntimeError):
    """Two oracle resolutions disagree by more than the tolerance."""


class SegmentMismatchError(SafeNetError, ValueError):
    """A parameter vector does not match the network's segment layout."""


class NonFiniteLossError(SafeNetError, FloatingPointError):
    """A loss, gradient or Hessian-vector product is NaN or infinite."""


class ZeroTraceError(SafeNetError, ZeroDivisionError):
    """A tangent-kernel trace is below the usable threshold."""


class ConfigError(SafeNetError, ValueError):
    """An experiment configuration is invalid."""


class ZeroNormError(SafeNetError, ZeroDivisionError):
    """A relative error was requested against an all-zero reference."""
