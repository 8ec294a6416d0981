from pathlib import Path
from typing import Union

import fsspec

from .destination import Destination


class FileSystemDestination(Destination):
    """Local path, accessed through the fsspec ``file`` protocol. Parent folders are created on write"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.fs: fsspec.AbstractFileSystem = fsspec.filesystem("file")

    def __truediv__(self, other: str) -> "FileSystemDestination":
        return FileSystemDestination(self.path / other)

    def __str__(self) -> str:
        return str(self.path)

    def __repr__(self) -> str:
        return f"FileSystemDestination({str(self.path)!r})"

    @property
    def name(self) -> str:
        return self.path.name

    def mkdir(self):
        self.fs.makedirs(str(self.path), exist_ok=True)

    def exists(self) -> bool:
        return self.fs.exists(str(self.path))

    def upload_bytes(self, data: bytes):
        self.fs.makedirs(str(self.path.parent), exist_ok=True)
        self.fs.pipe_file(str(self.path), data)

    def read_bytes(self) -> bytes:
        return self.fs.cat_file(str(self.path))

    def append_str(self, data: str):
        self.fs.makedirs(str(self.path.parent), exist_ok=True)
        with self.fs.open(str(self.path), "ab") as f:
            f.write(data.encode("utf-8"))


def as_destination(target: Union[Destination, Path, str]) -> Destination:
    if isinstance(target, Destination):
        return target
    return FileSystemDestination(target)
