"""
Logger configuration for the node daemon, the harness and the CLI.
"""

import logging
from datetime import datetime
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path
from typing import Any, MutableMapping

from .config import app_settings

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


def configure_logger(name: str) -> logging.Logger:
    """
    Creates and configures a logger with appropriate handlers based on environment.

    Test and production runs log to the console only; development runs also keep
    a daily rotating file of warnings under ``logs/``.
    """
    log_level = app_settings.LOG_LEVEL
    logger = logging.getLogger(name)
    logger.setLevel(log_level)
    logger_format = logging.Formatter(LOG_FORMAT)

    if not logger.hasHandlers():
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logger_format)
        console_handler.setLevel(log_level)

        if app_settings.CURRENT_ENV not in ("test", "production"):
            logs_dir = Path.cwd() / "logs"
            logs_dir.mkdir(exist_ok=True)

            log_file = logs_dir / f"scopestack-{datetime.now().strftime('%d-%m-%Y')}.log"
            file_handler = TimedRotatingFileHandler(
                log_file, when="midnight", interval=1, backupCount=7
            )
            file_handler.setFormatter(logger_format)
            file_handler.setLevel(logging.WARNING)
            logger.addHandler(file_handler)

        logger.addHandler(console_handler)

    return logger


class ScopeLogAdapter(logging.LoggerAdapter):
    """Prefixes every record with the ``[node/scope]`` it belongs to."""

    def process(
        self, msg: Any, kwargs: MutableMapping[str, Any]
    ) -> tuple[Any, MutableMapping[str, Any]]:
        return f"[{self.extra['node']}/{self.extra['scope']}] {msg}", kwargs


def scope_logger(node: str, scope: str) -> ScopeLogAdapter:
    """Return the application logger bound to one BPA instance."""
    return ScopeLogAdapter(app_logger, {"node": node, "scope": scope})


# Create a default logger for the application
app_logger = configure_logger("scopestack")

# Reduce verbosity of third-party loggers
logging.getLogger("uvicorn").setLevel(logging.WARNING)
logging.getLogger("sqlalchemy.engine").setLevel(logging.WARNING)
