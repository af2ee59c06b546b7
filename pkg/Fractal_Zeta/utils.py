from __future__ import annotations

import logging
from typing import Any, Dict

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError as DRFValidationError

from .exceptions import ConsistencyFailure, GuardRejection, InputRejected, ZetaError

logger = logging.getLogger('studies')

EXIT_OK = 0
EXIT_GUARD = 2
EXIT_CONSISTENCY = 3


def command_exception_handler(exc: Exception) -> CommandError:
    """Translate library errors into a CommandError carrying the CLI exit code."""

    if isinstance(exc, CommandError):
        return exc

    if isinstance(exc, DRFValidationError):
        return CommandError(f"Validation Error: {format_error_detail(exc.detail)}", returncode=EXIT_GUARD)

    if isinstance(exc, (GuardRejection, InputRejected)):
        logger.warning("Rejected: %s", exc.message)
        return CommandError(f"{exc.__class__.__name__}: {exc.message}", returncode=EXIT_GUARD)

    if isinstance(exc, ConsistencyFailure):
        logger.error("Consistency failure: %s %s", exc.message, exc.detail)
        return CommandError(f"ConsistencyFailure: {exc.message}", returncode=EXIT_CONSISTENCY)

    if isinstance(exc, ZetaError):
        return CommandError(f"{exc.__class__.__name__}: {exc.message}", returncode=1)

    # Log unhandled exceptions
    logger.error(f"Unhandled exception: {exc}", exc_info=True)
    raise exc


def format_error_detail(detail: Any) -> str:
    """Flatten DRF error details into one line."""
    if isinstance(detail, dict):
        return '; '.join(f"{key}: {format_error_detail(value)}" for key, value in detail.items())
    if isinstance(detail, (list, tuple)):
        return ', '.join(format_error_detail(item) for item in detail)
    return str(detail)


def zeta_settings() -> Dict[str, Any]:
    from django.conf import settings
    return getattr(settings, 'ZETA_SETTINGS', {})
