"""Exception hierarchy shared across the package.

Every error carries a short machine-readable ``code`` so CLI exit codes and
tests can match on the failure kind without parsing messages.
"""

from __future__ import annotations


class TgifError(Exception):
    """Base class for all package errors."""

    code = "error"


class EmptySignalError(TgifError):
    code = "empty-signal"


class RateMismatchError(TgifError):
    code = "rate-mismatch"


class SilentSourceError(TgifError):
    code = "silent-source"


class OrthogonalEstimateError(TgifError):
    code = "orthogonal-estimate"


class BadInputError(TgifError):
    code = "bad-input"


class BadLabelError(TgifError):
    code = "bad-label"


class GroupTooSmallError(TgifError):
    code = "group-too-small"


class NoEnrollmentSourceError(TgifError):
    code = "no-enrollment-source"


class AssetNotFoundError(TgifError):
    code = "asset-not-found"


class RoleMismatchError(TgifError):
    code = "role-mismatch"


class ConfigError(TgifError):
    code = "config-error"


class DivergedError(TgifError):
    """Training hit a non-finite loss; ``last_good`` points at the most
    recent finite-loss checkpoint (may be None if divergence was immediate)."""

    code = "diverged"

    def __init__(self, message: str, last_good: str | None = None):
        super().__init__(message)
        self.last_good = last_good
