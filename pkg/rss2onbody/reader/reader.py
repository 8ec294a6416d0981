from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel

from ..ban_synth import RssTrace
from ..destination import Destination, as_destination
from ..errors import FormatVersionError
from ..labels import DeviceLabel, MotionLabel

INDEX_FILE_NAME = "traces.json"
INDEX_VERSION = 1


class TraceIndexEntry(BaseModel):
    path: str
    """Trace file, relative to the index"""

    link: DeviceLabel
    motion: MotionLabel
    seed: Optional[int] = None
    """Generator seed, None for captured traces"""

    sample_rate: float = 500.0


class TraceIndex(BaseModel):
    index_version: int = INDEX_VERSION
    traces: list[TraceIndexEntry] = []


class TraceReader(ABC):
    """Reads labeled RSS traces from storage"""

    @abstractmethod
    def read_trace(
        self, source: Destination, link: DeviceLabel, motion: MotionLabel
    ) -> RssTrace:
        pass

    @abstractmethod
    def write_trace(self, trace: RssTrace, target: Destination):
        pass

    @property
    @abstractmethod
    def file_suffix(self) -> str:
        pass

    def read_directory(self, folder: Union[Destination, Path]) -> list[RssTrace]:
        """Reads every trace listed in the folder's `traces.json`, in index order"""
        folder = as_destination(folder)
        index = read_trace_index(folder)
        traces = []
        for entry in index.traces:
            trace = self.read_trace(folder / entry.path, entry.link, entry.motion)
            if entry.seed is not None:
                trace = RssTrace(
                    samples=trace.samples,
                    sample_rate=trace.sample_rate,
                    link=trace.link,
                    motion=trace.motion,
                    seed=entry.seed,
                    source=trace.source,
                )
            traces.append(trace)
        return traces

    def write_directory(
        self, traces: list[RssTrace], folder: Union[Destination, Path]
    ) -> TraceIndex:
        folder = as_destination(folder)
        folder.mkdir()
        entries = []
        for i, trace in enumerate(traces):
            name = (
                f"trace_{i:05d}_{trace.link.name.lower()}_{trace.motion.value}"
                + self.file_suffix
            )
            self.write_trace(trace, folder / name)
            entries.append(
                TraceIndexEntry(
                    path=name,
                    link=trace.link,
                    motion=trace.motion,
                    seed=trace.seed if trace.source is None else None,
                    sample_rate=trace.sample_rate,
                )
            )
        index = TraceIndex(traces=entries)
        write_trace_index(index, folder)
        return index


def read_trace_index(folder: Destination) -> TraceIndex:
    path = folder / INDEX_FILE_NAME
    doc = path.read_json("Trace index")
    if not isinstance(doc, dict) or doc.get("index_version") != INDEX_VERSION:
        raise FormatVersionError(
            f"Unsupported index_version in {path}"
        )
    return TraceIndex.model_validate(doc)


def write_trace_index(index: TraceIndex, folder: Destination):
    (folder / INDEX_FILE_NAME).upload_model(index)
