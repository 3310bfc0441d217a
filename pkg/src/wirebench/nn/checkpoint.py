"""WBNN weight checkpoint files.

Layout (little-endian)::

    b"WBNN"            magic
    u16                format version (1)
    u32 + bytes        UTF-8 JSON header: {"input_shape": [...], "layers": [...], "meta": {...}}
    u32                number of arrays
    per array:
        u32 + bytes    UTF-8 name
        u32            ndim
        u32 * ndim     dims
        f32 * prod     values, C order
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .layers import Network
from .spec import LayerSpec

MAGIC = b"WBNN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_network(path, net, meta=None):
    header = json.dumps({
        "input_shape": list(net.input_shape),
        "layers": [s.to_dict() for s in net.specs],
        "meta": meta or {},
    }, sort_keys=True).encode("utf-8")
    state = net.state_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(state)))
        for name, arr in state.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read(fh, n):
    b = fh.read(n)
    if len(b) != n:
        raise CheckpointError("truncated WBNN file")
    return b


def load_network(path, dtype=np.float64):
    """Return ``(network, meta)`` from a WBNN file."""
    with open(path, "rb") as fh:
        if _read(fh, 4) != MAGIC:
            raise CheckpointError(f"{path}: not a WBNN file")
        (version,) = struct.unpack("<H", _read(fh, 2))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported WBNN version {version}")
        (hlen,) = struct.unpack("<I", _read(fh, 4))
        header = json.loads(_read(fh, hlen).decode("utf-8"))
        (count,) = struct.unpack("<I", _read(fh, 4))
        state = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", _read(fh, 4))
            name = _read(fh, nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read(fh, 4))
            dims = struct.unpack(f"<{ndim}I", _read(fh, 4 * ndim)) if ndim else ()
            n = int(np.prod(dims)) if ndim else 1
            state[name] = np.frombuffer(_read(fh, 4 * n), dtype="<f4").reshape(dims)
    specs = [LayerSpec.from_dict(d) for d in header["layers"]]
    net = Network(specs, header["input_shape"], dtype=dtype)
    net.load_state_dict(state)
    return net, header.get("meta", {})
