"""Checkpoint files: magic "CUNW", version, config JSON, float32 grids, CRC32.

Layout (integers little-endian):

    bytes 0..3    magic b"CUNW"
    bytes 4..7    u32 format version (currently 1)
    bytes 8..11   u32 byte length of the UTF-8 config JSON that follows
    ...           config JSON (sorted keys: base_channels, depth,
                  dropout_rate, in_channels, seed)
    ...           every tensor from param_spec(config), as row-major
                  float32, in that exact order
    last 4 bytes  u32 CRC32 of everything above

Since training runs in float32, save -> load round-trips bit-identically.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import (
    CheckpointCRCError,
    CheckpointFormatError,
    CheckpointVersionError,
    ParameterError,
    ShapeError,
)
from .unet import UNetConfig, UNetParams, param_spec

CUNW_MAGIC = b"CUNW"
CHECKPOINT_VERSION = 1


def checkpoint_bytes(params: UNetParams) -> bytes:
    cfg_json = json.dumps(params.config.to_dict(), sort_keys=True).encode("utf-8")
    chunks = [CUNW_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(cfg_json)), cfg_json]
    for name, shape in param_spec(params.config):
        arr = params.tensors[name]
        if tuple(arr.shape) != shape:
            raise ShapeError(f"parameter {name!r} has shape {arr.shape}, expected {shape}")
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(params: UNetParams, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(params))


def load_checkpoint(path) -> tuple[UNetParams, UNetConfig]:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != CUNW_MAGIC:
        raise CheckpointFormatError(
            f"bad magic {data[:4]!r}, expected {CUNW_MAGIC!r} ('CUNW')"
        )
    if len(data) < 16:
        raise CheckpointCRCError("checkpoint truncated")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    body, tail = data[:-4], data[-4:]
    if struct.unpack("<I", tail)[0] != zlib.crc32(body):
        raise CheckpointCRCError("CRC mismatch (file corrupt or truncated)")
    cfg_len = struct.unpack_from("<I", data, 8)[0]
    if 12 + cfg_len > len(body):
        raise CheckpointFormatError("config block overruns the file")
    try:
        cfg = UNetConfig.from_dict(json.loads(body[12 : 12 + cfg_len].decode("utf-8")))
    except (json.JSONDecodeError, UnicodeDecodeError, TypeError, ParameterError) as e:
        raise CheckpointFormatError(f"bad config block: {e}") from e
    tensors: dict[str, np.ndarray] = {}
    offset = 12 + cfg_len
    for name, shape in param_spec(cfg):
        count = int(np.prod(shape))
        if offset + 4 * count > len(body):
            raise CheckpointFormatError("parameter data shorter than the config implies")
        tensors[name] = (
            np.frombuffer(body, dtype="<f4", count=count, offset=offset)
            .reshape(shape)
            .astype(np.float32)
        )
        offset += 4 * count
    if offset != len(body):
        raise CheckpointFormatError("trailing bytes after parameter data")
    return UNetParams(cfg, tensors), cfg
