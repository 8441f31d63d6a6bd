"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: user-facing errors (bad shapes, bad
configuration, malformed files) exit with 1, everything else with 2.
"""

from __future__ import annotations


class GuidedViTError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GuidedViTError, ValueError):
    """Tensor or clip dimensions do not satisfy an operation's contract."""


class ConfigError(GuidedViTError, ValueError):
    """A configuration value is out of range or inconsistent with another."""


class FormatError(GuidedViTError, ValueError):
    """A file on disk does not follow its declared format."""


class NumericError(GuidedViTError, ArithmeticError):
    """An operation produced NaN or Inf."""


class TrainingDivergedError(NumericError):
    """The training loss became non-finite."""


class VerificationError(GuidedViTError, RuntimeError):
    """A gradient check or cross-check failed."""


USER_ERRORS: tuple[type[Exception], ...] = (ShapeError, ConfigError, FormatError)
