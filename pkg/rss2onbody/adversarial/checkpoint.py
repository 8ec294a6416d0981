"""Checkpoint container.

    magic        8 bytes   b"R2OBCKPT"
    version      uint16    1
    header_len   uint32
    header       header_len bytes of compact, key-sorted JSON:
                 {"arch": {...}, "input_dim": int, "n_z": int, "params": [[id, shape], ...]}
    blobs        float64 little endian: standardization mean, std, then every parameter in header order
    sha256       32 bytes  digest of everything before it
"""

import hashlib
import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..config import ArchConfig
from ..destination import Destination, as_destination
from ..errors import ChecksumError, FormatVersionError
from .model import ModelParams, Standardization

MAGIC = b"R2OBCKPT"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sHI")
_DIGEST_SIZE = 32


def checkpoint_to_bytes(model: ModelParams) -> bytes:
    header = {
        "arch": model.arch.model_dump(mode="json"),
        "input_dim": int(model.standardization.mean.shape[0]),
        "n_z": model.n_z,
        "params": [[pid, list(value.shape)] for pid, value in model.params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blobs = [model.standardization.mean, model.standardization.std] + list(model.params.values())
    body = b"".join(
        [_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)), header_bytes]
        + [np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blobs]
    )
    return body + hashlib.sha256(body).digest()


def checkpoint_from_bytes(data: bytes, source: str = "checkpoint") -> ModelParams:
    if len(data) < _PREAMBLE.size + _DIGEST_SIZE:
        raise ChecksumError(f"{source} is truncated")
    magic, version, header_len = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise FormatVersionError(f"{source} is not a checkpoint file")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"Unsupported checkpoint version {version} in {source}, expected {FORMAT_VERSION}"
        )
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"Checksum mismatch in {source}")

    offset = _PREAMBLE.size
    header = json.loads(body[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(body):
            raise ChecksumError(f"Parameter section of {source} is shorter than its header")
        arr = np.frombuffer(body[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
        return arr

    dim = int(header["input_dim"])
    mean = take((dim,))
    std = take((dim,))
    params = {pid: take(tuple(shape)) for pid, shape in header["params"]}
    if offset != len(body):
        raise ChecksumError(f"{source} carries trailing bytes after the parameters")
    return ModelParams(
        arch=ArchConfig.model_validate(header["arch"]),
        n_z=int(header["n_z"]),
        params=params,
        standardization=Standardization(mean=mean, std=std),
    )


def save_checkpoint(model: ModelParams, path: Union[Destination, Path]):
    as_destination(path).upload_bytes(checkpoint_to_bytes(model))


def load_checkpoint(path: Union[Destination, Path]) -> ModelParams:
    dest = as_destination(path).require("Checkpoint")
    return checkpoint_from_bytes(dest.read_bytes(), str(dest))
