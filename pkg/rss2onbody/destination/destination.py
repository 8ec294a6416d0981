import json
from abc import ABC, abstractmethod
from typing import Any

from pydantic import BaseModel
from typing_extensions import Self

from ..errors import InvalidConfigError, MissingInputError


class Destination(ABC):
    """A file or folder that stage outputs are written to and inputs are read from"""

    @abstractmethod
    def __truediv__(self, other: str) -> Self: ...

    @abstractmethod
    def __str__(self) -> str: ...

    @property
    @abstractmethod
    def name(self) -> str: ...

    @abstractmethod
    def mkdir(self): ...

    @abstractmethod
    def exists(self) -> bool: ...

    @abstractmethod
    def upload_bytes(self, data: bytes): ...

    @abstractmethod
    def read_bytes(self) -> bytes: ...

    @abstractmethod
    def append_str(self, data: str): ...

    def upload_str(self, data: str):
        self.upload_bytes(data.encode("utf-8"))

    def read_str(self) -> str:
        return self.read_bytes().decode("utf-8")

    def require(self, what: str = "File") -> Self:
        if not self.exists():
            raise MissingInputError(f"{what} {self} not found")
        return self

    def upload_model(self, model: BaseModel):
        """Pretty printed JSON, newline terminated"""
        self.upload_str(model.model_dump_json(indent=2) + "\n")

    def read_json(self, what: str = "File") -> Any:
        text = self.require(what).read_str()
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidConfigError(f"{self} is not valid JSON: {e}") from e
