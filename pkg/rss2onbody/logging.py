from datetime import datetime
from typing import Any, Literal, Optional, Protocol

from pydantic import BaseModel

LogLevel = Literal["info", "warning", "error"]


class LogMessage(BaseModel):
    """One line of a run's `log.jsonl`"""

    message: str
    level: LogLevel
    date: datetime
    run_id: str
    command: Optional[str] = None
    stage: Optional[str] = None
    sub_stage: Optional[str] = None
    data: Optional[dict[str, Any]] = None
    traceback: Optional[str] = None

    def render(self) -> str:
        """Single line form used for the console logger"""
        parts = [self.message]
        if self.data:
            parts.append(", ".join(f"{k}={v}" for k, v in self.data.items()))
        if self.stage:
            parts.append("stage=" + "/".join(s for s in (self.stage, self.sub_stage) if s))
        if self.traceback:
            parts.append(f"traceback: {self.traceback}")
        return " | ".join(parts)


class StorageBackend(Protocol):
    def log(self, msg: LogMessage): ...

    def flush(self): ...
