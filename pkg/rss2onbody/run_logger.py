import logging
from datetime import datetime, timezone
from typing import Any, Literal, Optional, Union
from uuid import uuid4

from .destination import Destination
from .logging import LogLevel, LogMessage, StorageBackend

_STDLIB_LEVELS: dict[str, int] = {
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}


class JsonLinesStorageBackend(StorageBackend):
    """Buffers messages and appends them to a JSON lines file"""

    def __init__(self, target: Destination, buffer_size: int = 10):
        self.target = target
        self.buffer_size = buffer_size
        self._buffer: list[str] = []

    def log(self, msg: LogMessage):
        self._buffer.append(msg.model_dump_json())
        if len(self._buffer) >= self.buffer_size:
            self.flush()

    def flush(self):
        if self._buffer:
            self.target.append_str("\n".join(self._buffer) + "\n")
            self._buffer = []


class RunLogger:
    """Structured logger of one command run.

    Every message goes to the storage backend (by default `log_file_path` as JSON lines)
    and, rendered to one line, to `base_logger` if given.
    """

    def __init__(
        self,
        log_file_path: Optional[Destination] = None,
        base_logger: Optional[logging.Logger] = None,
        log_name: Optional[str] = None,
        storage_backend: Union[StorageBackend, Literal["default"], None] = "default",
    ):
        self.run_id = str(uuid4())
        self.base_logger = base_logger
        self.log_name = log_name
        if storage_backend == "default":
            storage_backend = (
                JsonLinesStorageBackend(log_file_path) if log_file_path is not None else None
            )
        self.storage_backend = storage_backend

    def log(
        self,
        level: LogLevel,
        message: str,
        *,
        stage: Optional[str] = None,
        sub_stage: Optional[str] = None,
        data: Optional[dict[str, Any]] = None,
        traceback: Optional[str] = None,
    ):
        msg = LogMessage(
            message=message,
            level=level,
            date=datetime.now(tz=timezone.utc),
            run_id=self.run_id,
            command=self.log_name,
            stage=stage,
            sub_stage=sub_stage,
            data=data,
            traceback=traceback,
        )
        if self.storage_backend is not None:
            self.storage_backend.log(msg)
        if self.base_logger is not None and self.base_logger.isEnabledFor(_STDLIB_LEVELS[level]):
            self.base_logger.log(_STDLIB_LEVELS[level], msg.render())

    def info(self, message: str, **fields: Any):
        self.log("info", message, **fields)

    def warning(self, message: str, **fields: Any):
        self.log("warning", message, **fields)

    def error(self, message: str, **fields: Any):
        self.log("error", message, **fields)

    def flush(self):
        if self.storage_backend is not None:
            self.storage_backend.flush()


def default_logger(name: str) -> RunLogger:
    """A logger that only forwards to the stdlib logger of the calling module"""
    return RunLogger(base_logger=logging.getLogger(name), log_name=name)
