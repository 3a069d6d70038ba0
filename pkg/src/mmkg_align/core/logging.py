"""
Diagnostic stream setup.

All diagnostics are structlog records rendered as line-delimited JSON on stderr.
"""

import logging
import sys
from typing import TextIO

import structlog

_configured = False


def _logger_factory(stream: TextIO | None):
    """Resolve sys.stderr per logger so a swapped stderr is honoured."""

    def factory(*args: object) -> structlog.PrintLogger:
        return structlog.PrintLogger(file=stream or sys.stderr)

    return factory


def configure_logging(level: int = logging.INFO, stream: TextIO | None = None) -> None:
    """Route structlog records to ``stream`` (stderr by default) as JSON lines."""
    global _configured
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(sort_keys=True),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=_logger_factory(stream),
        cache_logger_on_first_use=False,
    )
    _configured = True


def get_logger(name: str) -> structlog.typing.FilteringBoundLogger:
    """Lazy logger whose records carry ``logger_name``; configures defaults on first use.

    The proxy is never bound here, so the stream is looked up when a record is emitted.
    """
    if not _configured:
        configure_logging()
    return structlog.get_logger(logger_name=name)
