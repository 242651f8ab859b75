"""Binary checkpoint container for U-Net parameters.

Layout (little-endian)::

    b"UNSG"  u32 version=1  u32 tensor_count
    u32 in_channels, out_channels, depth, base_width, img_size
    per tensor, sorted by name:
        u32 name_len, name (UTF-8), u32 rank, u32 extents[rank], f32 values[prod(extents)]
"""
from __future__ import annotations

import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, IntegrityError, VersionError
from .model import UNetConfig, param_shapes

MAGIC = b"UNSG"
VERSION = 1
_U32 = struct.Struct("<I")


def encode_checkpoint(params: dict, config: UNetConfig) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(params)),
             struct.pack("<5I", config.in_channels, config.out_channels, config.depth,
                         config.base_width, config.img_size)]
    for name in sorted(params):
        value = np.asarray(params[name])
        raw = name.encode("utf-8")
        parts.append(_U32.pack(len(raw)) + raw)
        parts.append(struct.pack(f"<I{value.ndim}I", value.ndim, *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(params: dict, config: UNetConfig, path) -> None:
    """Write atomically: a temp file in the target directory, then rename."""
    path = Path(path)
    data = encode_checkpoint(params, config)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if n > len(self.data) - self.pos:
            raise IntegrityError(f"checkpoint truncated while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_checkpoint(data: bytes) -> tuple[dict, UNetConfig]:
    r = _Reader(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not a terraseg checkpoint (bad magic)")
    r.take(4, "magic")
    version = r.u32("version")
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version}")
    count = r.u32("tensor count")
    fields = [r.u32("config") for _ in range(5)]
    try:
        config = UNetConfig(*fields)
    except ConfigurationError as exc:
        raise IntegrityError(f"invalid embedded config: {exc}") from exc
    expected = param_shapes(config)
    if count != len(expected):
        raise IntegrityError(f"config implies {len(expected)} tensors, file declares {count}")

    params = {}
    for _ in range(count):
        name_len = r.u32("name length")
        try:
            name = r.take(name_len, "tensor name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IntegrityError("tensor name is not valid UTF-8") from exc
        if name not in expected or name in params:
            raise IntegrityError(f"unexpected tensor {name!r}")
        rank = r.u32(f"{name} rank")
        if rank != len(expected[name]):
            raise IntegrityError(f"{name}: rank {rank} does not match config")
        shape = tuple(r.u32(f"{name} extents") for _ in range(rank))
        if shape != expected[name]:
            raise IntegrityError(f"{name}: shape {shape} does not match config {expected[name]}")
        raw = r.take(4 * math.prod(shape), f"{name} values")
        params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
    if r.pos != len(data):
        raise IntegrityError(f"{len(data) - r.pos} trailing bytes after last tensor")
    return dict(sorted(params.items())), config


def load_checkpoint(path) -> tuple[dict, UNetConfig]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    try:
        return decode_checkpoint(data)
    except (FormatError, IntegrityError) as exc:
        raise type(exc)(f"{path}: {exc}") from None
