"""GLM1 model container.

Layout (all integers little-endian):

    b"GLM1"
    u8  tag length, then the ASCII architecture tag ("lstm" or "baseline")
    u32 header count n, then n u32 dimensions
          lstm:     input_dim, hidden, seq_len, n_classes
          baseline: input_dim, seq_len, width1, width2, n_classes
    f64 every array of Model.arrays() in declaration order, row-major
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np

from .models import Architecture, Model, init_model

MAGIC = b"GLM1"


class ContainerError(ValueError):
    pass


def _header(arch: Architecture) -> tuple[str, list[int]]:
    if arch.variant == "lstm":
        return "lstm", [arch.input_dim, arch.hidden, arch.seq_len, arch.n_classes]
    return "baseline", [arch.input_dim, arch.seq_len, *arch.widths, arch.n_classes]


def dumps(model: Model) -> bytes:
    tag, dims = _header(model.arch)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", len(tag)))
    buf.write(tag.encode("ascii"))
    buf.write(struct.pack(f"<I{len(dims)}I", len(dims), *dims))
    for _, arr in model.arrays():
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> Model:
    if data[:4] != MAGIC:
        raise ContainerError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    pos = 4
    (tag_len,) = struct.unpack_from("<B", data, pos)
    pos += 1
    tag = data[pos : pos + tag_len].decode("ascii")
    pos += tag_len
    (n,) = struct.unpack_from("<I", data, pos)
    pos += 4
    dims = struct.unpack_from(f"<{n}I", data, pos)
    pos += 4 * n
    if tag == "lstm" and n == 4:
        d, h, s, c = dims
        arch = Architecture("lstm", d, s, hidden=h, n_classes=c)
    elif tag == "baseline" and n == 5:
        d, s, w1, w2, c = dims
        arch = Architecture("baseline", d, s, widths=(w1, w2), n_classes=c)
    else:
        raise ContainerError(f"unknown architecture tag {tag!r} with {n} dimensions")
    model = init_model(arch, seed=0)
    for name, arr in model.arrays():
        nbytes = arr.size * 8
        if len(data) - pos < nbytes:
            raise ContainerError(f"truncated container while reading {name}")
        arr[...] = np.frombuffer(data, dtype="<f8", count=arr.size, offset=pos).reshape(arr.shape)
        pos += nbytes
    if pos != len(data):
        raise ContainerError(f"{len(data) - pos} trailing bytes after the last array")
    return model


def save_model(path: str | os.PathLike, model: Model) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path: str | os.PathLike) -> Model:
    with open(path, "rb") as fh:
        return loads(fh.read())

