from __future__ import annotations

from typing import Any, Dict, Optional


class ZetaError(Exception):
    """Base error for every failure raised by the zeta apps."""

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.detail: Dict[str, Any] = detail or {}

    def as_dict(self) -> Dict[str, Any]:
        return {'error': self.__class__.__name__, 'detail': self.message, **self.detail}


class InputRejected(ZetaError, ValueError):
    """Malformed input: self-loops, bad indices, inadmissible words, unknown families."""


class GuardRejection(ZetaError):
    """A domain or resource guard refused the request."""


class MemoryBudgetExceeded(GuardRejection):
    pass


class CycleBudgetExceeded(GuardRejection):
    pass


class DomainGuardViolation(GuardRejection):
    """Evaluation point outside the disc or region where a method is valid."""


class DetDomainError(GuardRejection):
    """0 lies in the convex hull of the spectrum, so det_tau is undefined."""


class ConsistencyFailure(ZetaError):
    """Two independent computations disagree beyond their recorded bound."""
