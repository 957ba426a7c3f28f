"""
Logging setup for uae-minmax.

Configures the root logger once and injects the active run identifier into
every log record, so that interleaved output of batch attacks and pipeline
phases can be attributed to a run directory.
"""
import contextvars
import logging
import sys
from contextlib import contextmanager
from typing import Iterator

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(run_id)s] %(message)s"

_current_run_id: contextvars.ContextVar[str] = contextvars.ContextVar("run_id", default="-")


class RunContextFilter(logging.Filter):
    """Attach the current run identifier to each record as `record.run_id`."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = _current_run_id.get()
        return True


def setup_logging(log_level: str = "INFO") -> None:
    """
    Configure the root logger.

    Calling this more than once replaces the handler instead of stacking
    duplicates, which keeps pytest and repeated CLI invocations quiet.

    Args:
        log_level: Name of the logging level (e.g. "INFO", "DEBUG")
    """
    level = getattr(logging, str(log_level).upper(), logging.INFO)
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_uae_handler", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.addFilter(RunContextFilter())
    handler._uae_handler = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)

    # Third-party libraries are noisy at DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("PIL").setLevel(logging.WARNING)


def current_run_id() -> str:
    return _current_run_id.get()


@contextmanager
def run_context(run_id: str) -> Iterator[str]:
    """
    Bind `run_id` to all log records emitted inside the block.

    Args:
        run_id: Identifier of the run (also the output directory name)

    Yields:
        The bound run identifier
    """
    token = _current_run_id.set(run_id)
    try:
        yield run_id
    finally:
        _current_run_id.reset(token)
