import logging
import sys
import uuid
from contextvars import ContextVar
from datetime import datetime
from pathlib import Path

# Context variable for the run correlation ID (thread-safe)
_run_id: ContextVar[str] = ContextVar("run_id", default="")

LOGGER_NAME = "gmf_partition"


def set_run_id(run_id: str | None = None) -> str:
    """
    Set run correlation ID for current context.
    If not provided, generates a new one.
    Returns the run ID.
    """
    rid = run_id or f"run-{uuid.uuid4().hex[:8]}"
    _run_id.set(rid)
    return rid


def get_run_id() -> str:
    """Get current run correlation ID."""
    return _run_id.get()


class StructuredLogger:
    """Simple wrapper to support key-value logging with a run ID"""

    def __init__(self, logger):
        self._logger = logger

    def _format_msg(self, msg, **kwargs):
        rid = get_run_id()
        if rid:
            kwargs["rid"] = rid

        if kwargs:
            kv_str = " ".join(f"{k}={v}" for k, v in kwargs.items())
            return f"{msg} {kv_str}"
        return msg

    def is_enabled_for(self, level: int) -> bool:
        return self._logger.isEnabledFor(level)

    def debug(self, msg, **kwargs):
        if self._logger.isEnabledFor(logging.DEBUG):
            self._logger.debug(self._format_msg(msg, **kwargs))

    def info(self, msg, **kwargs):
        self._logger.info(self._format_msg(msg, **kwargs))

    def warning(self, msg, **kwargs):
        self._logger.warning(self._format_msg(msg, **kwargs))

    def error(self, msg, **kwargs):
        self._logger.error(self._format_msg(msg, **kwargs))

    def exception(self, msg, **kwargs):
        self._logger.exception(self._format_msg(msg, **kwargs))


def setup_logger(level: str = "INFO", log_dir: str | Path | None = None):
    """
    Setup logging with console and optional file output

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR)
        log_dir: Directory for a DEBUG-level log file; no file when None

    Returns:
        Configured logger instance
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)

    base_logger = logging.getLogger(LOGGER_NAME)
    base_logger.setLevel(logging.DEBUG if log_dir else numeric_level)
    base_logger.handlers = []  # Clear existing handlers
    base_logger.propagate = False

    # Console goes to stderr so CLI stdout stays parseable
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(numeric_level)
    console_fmt = logging.Formatter("%(asctime)s [%(levelname)s] %(message)s", datefmt="%H:%M:%S")
    console_handler.setFormatter(console_fmt)
    base_logger.addHandler(console_handler)

    if log_dir:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)

        log_file = log_path / f"gmf_{datetime.now():%Y%m%d}.log"
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)  # File gets all logs
        file_fmt = logging.Formatter("%(asctime)s [%(levelname)s] %(name)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
        file_handler.setFormatter(file_fmt)
        base_logger.addHandler(file_handler)

        base_logger.debug(f"Logging to file: {log_file}")

    return StructuredLogger(base_logger)


logger = setup_logger()
