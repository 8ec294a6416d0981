"""Feature dataset file.

Byte layout (little endian):

    magic        8 bytes   b"R2OBFEAT"
    version      uint16    1
    count        uint32    number of records
    dim          uint32    380
    records      count x (dim float64 | link uint8 | motion uint8 | flags uint8 | trace_id uint32)
    sha256       32 bytes  digest of everything before it
"""

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .destination import Destination, as_destination
from .errors import ChecksumError, FormatVersionError, ShapeMismatchError
from .features import PROFILE_DIM, PropagationProfile
from .labels import DeviceLabel, MotionLabel

MAGIC = b"R2OBFEAT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHII")
_DIGEST_SIZE = 32


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [
            ("x", "<f8", (dim,)),
            ("link", "u1"),
            ("motion", "u1"),
            ("flags", "u1"),
            ("trace_id", "<u4"),
        ]
    )


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    x: np.ndarray
    """N x 380 raw profiles"""
    link: np.ndarray
    """N device labels, 1 on-body / 0 off-body"""
    motion: np.ndarray
    """N motion indices"""
    trace_id: np.ndarray
    flags: np.ndarray

    def __post_init__(self):
        n = self.x.shape[0]
        if self.x.ndim != 2:
            raise ShapeMismatchError("x must be a matrix")
        for name in ("link", "motion", "trace_id", "flags"):
            if getattr(self, name).shape != (n,):
                raise ShapeMismatchError(f"{name} must hold one entry per row of x")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @classmethod
    def empty(cls, dim: int = PROFILE_DIM) -> "FeatureDataset":
        return cls(
            x=np.zeros((0, dim)),
            link=np.zeros(0, dtype=np.uint8),
            motion=np.zeros(0, dtype=np.uint8),
            trace_id=np.zeros(0, dtype=np.uint32),
            flags=np.zeros(0, dtype=np.uint8),
        )

    @classmethod
    def from_profiles(cls, profiles: Sequence[PropagationProfile]) -> "FeatureDataset":
        if not profiles:
            return cls.empty()
        return cls(
            x=np.stack([p.vector for p in profiles]),
            link=np.array([int(p.link) for p in profiles], dtype=np.uint8),
            motion=np.array([p.motion.index for p in profiles], dtype=np.uint8),
            trace_id=np.array([p.trace_id for p in profiles], dtype=np.uint32),
            flags=np.array([int(p.flags) for p in profiles], dtype=np.uint8),
        )

    def select(self, index: Union[np.ndarray, Sequence[int]]) -> "FeatureDataset":
        idx = np.asarray(index)
        return FeatureDataset(
            x=self.x[idx],
            link=self.link[idx],
            motion=self.motion[idx],
            trace_id=self.trace_id[idx],
            flags=self.flags[idx],
        )

    def filter_motions(self, motions: Iterable[MotionLabel]) -> "FeatureDataset":
        wanted = [m.index for m in motions]
        return self.select(np.flatnonzero(np.isin(self.motion, wanted)))

    def motions(self) -> list[MotionLabel]:
        """Distinct motions present, in label order"""
        return [MotionLabel.from_index(int(i)) for i in np.unique(self.motion)]

    def links(self) -> list[DeviceLabel]:
        return [DeviceLabel(int(i)) for i in np.unique(self.link)]

    @staticmethod
    def concat(parts: Sequence["FeatureDataset"]) -> "FeatureDataset":
        if not parts:
            return FeatureDataset.empty()
        return FeatureDataset(
            x=np.concatenate([p.x for p in parts]),
            link=np.concatenate([p.link for p in parts]),
            motion=np.concatenate([p.motion for p in parts]),
            trace_id=np.concatenate([p.trace_id for p in parts]),
            flags=np.concatenate([p.flags for p in parts]),
        )


def dataset_to_bytes(dataset: FeatureDataset) -> bytes:
    records = np.zeros(len(dataset), dtype=_record_dtype(dataset.dim))
    records["x"] = dataset.x
    records["link"] = dataset.link
    records["motion"] = dataset.motion
    records["flags"] = dataset.flags
    records["trace_id"] = dataset.trace_id
    body = _HEADER.pack(MAGIC, FORMAT_VERSION, len(dataset), dataset.dim) + records.tobytes()
    return body + hashlib.sha256(body).digest()


def dataset_from_bytes(data: bytes, source: Optional[str] = None) -> FeatureDataset:
    where = f" in {source}" if source else ""
    if len(data) < _HEADER.size + _DIGEST_SIZE:
        raise ChecksumError(f"Feature file{where} is truncated")
    magic, version, count, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatVersionError(f"Not a feature dataset file{where}")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"Unsupported feature file version {version}{where}, expected {FORMAT_VERSION}"
        )
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"Checksum mismatch{where}")
    dtype = _record_dtype(dim)
    if len(body) != _HEADER.size + count * dtype.itemsize:
        raise ChecksumError(f"Record section size does not match the header{where}")
    records = np.frombuffer(body, dtype=dtype, count=count, offset=_HEADER.size)
    return FeatureDataset(
        x=np.array(records["x"], dtype=np.float64).reshape(count, dim),
        link=np.array(records["link"]),
        motion=np.array(records["motion"]),
        trace_id=np.array(records["trace_id"], dtype=np.uint32),
        flags=np.array(records["flags"]),
    )


def save_dataset(dataset: FeatureDataset, target: Union[Destination, Path]):
    as_destination(target).upload_bytes(dataset_to_bytes(dataset))


def load_dataset(source: Union[Destination, Path]) -> FeatureDataset:
    dest = as_destination(source).require("Feature file")
    return dataset_from_bytes(dest.read_bytes(), str(dest))
