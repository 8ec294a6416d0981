from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ValidationError

from .destination import Destination, as_destination
from .errors import FormatVersionError, InvalidConfigError

MANIFEST_FILE_NAME = "manifest.json"
MANIFEST_VERSION = 1
ENV_PREFIX = "RSS2ONBODY_"


def tool_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("rss2onbody")
    except PackageNotFoundError:
        return "0.0.0+local"


class RunManifest(BaseModel):
    manifest_version: Literal[1] = MANIFEST_VERSION
    command: str
    argv: list[str]
    """Arguments after the program name, as given. `replay` feeds them back to the CLI"""
    cwd: str
    """Working directory relative paths in argv are resolved against"""
    config: dict[str, Any] = {}
    """Snapshot of every config document in effect, by name"""
    seeds: list[int] = []
    inputs: list[str] = []
    outputs: list[str] = []
    env: dict[str, str] = {}
    """RSS2ONBODY_* environment values that were used as defaults"""
    tool_version: str
    timestamp: datetime

    @classmethod
    def create(
        cls,
        command: str,
        argv: list[str],
        *,
        config: Optional[dict[str, Any]] = None,
        seeds: Optional[list[int]] = None,
        inputs: Optional[list[str]] = None,
        outputs: Optional[list[str]] = None,
        env: Optional[dict[str, str]] = None,
    ) -> "RunManifest":
        return cls(
            command=command,
            argv=list(argv),
            cwd=str(Path.cwd()),
            config=config or {},
            seeds=seeds or [],
            inputs=inputs or [],
            outputs=outputs or [],
            env=env or {},
            tool_version=tool_version(),
            timestamp=datetime.now(tz=timezone.utc),
        )


def write_manifest(manifest: RunManifest, out_dir: Union[Destination, Path]) -> Destination:
    target = as_destination(out_dir) / MANIFEST_FILE_NAME
    target.upload_model(manifest)
    return target


def read_manifest(source: Union[Destination, Path]) -> RunManifest:
    """Accepts the manifest file itself or the folder holding it"""
    dest = as_destination(source)
    if dest.name != MANIFEST_FILE_NAME:
        dest = dest / MANIFEST_FILE_NAME
    doc = dest.read_json("Manifest")
    if not isinstance(doc, dict) or doc.get("manifest_version") != MANIFEST_VERSION:
        raise FormatVersionError(f"Unsupported manifest_version in {dest}")
    try:
        return RunManifest.model_validate(doc)
    except ValidationError as e:
        raise InvalidConfigError(f"Invalid manifest {dest}: {e}") from e
