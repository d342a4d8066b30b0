"""Binary checkpoint format.

Layout (all integers little-endian):

    magic  b"DAMS"
    u32    format version (currently 1)
    block  config JSON (u64 length + UTF-8 payload)
    block  parameter tensors
    block  Adam first moments
    block  Adam second moments
    u64    optimizer step counter
    block  RNG/stream state JSON

A tensor block is a u32 count followed by records of
(u16 name length, name, u8 ndim, u64 dims..., u8 dtype code, raw values).
Save -> load -> save is byte-identical.
"""

import json
import struct

import numpy as np

from ..errors import (CheckpointShapeError, CheckpointTruncatedError,
                      CheckpointVersionError)

MAGIC = b"DAMS"
VERSION = 1
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_DTYPE_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}


def _write_json_block(f, obj):
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    f.write(struct.pack("<Q", len(payload)))
    f.write(payload)


def _write_tensors(f, tensors):
    f.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        f.write(struct.pack("<H", len(raw)))
        f.write(raw)
        f.write(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            f.write(struct.pack("<Q", dim))
        code = _DTYPE_CODES[np.dtype(arr.dtype)]
        f.write(struct.pack("<B", code))
        f.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def save_checkpoint(path, *, config, params, adam_m, adam_v, step, rng_state):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        _write_json_block(f, config)
        _write_tensors(f, params)
        _write_tensors(f, adam_m)
        _write_tensors(f, adam_v)
        f.write(struct.pack("<Q", step))
        _write_json_block(f, rng_state)


class _Reader:
    def __init__(self, f):
        self.f = f

    def read(self, n):
        data = self.f.read(n)
        if len(data) != n:
            raise CheckpointTruncatedError("checkpoint file ended early")
        return data

    def unpack(self, fmt):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))[0]


def _read_json_block(r):
    length = r.unpack("<Q")
    return json.loads(r.read(length).decode("utf-8"))


def _read_tensors(r):
    out = {}
    count = r.unpack("<I")
    for _ in range(count):
        name = r.read(r.unpack("<H")).decode("utf-8")
        ndim = r.unpack("<B")
        shape = tuple(r.unpack("<Q") for _ in range(ndim))
        code = r.unpack("<B")
        if code not in _DTYPES:
            raise CheckpointVersionError(f"unknown tensor dtype code {code}")
        dtype = _DTYPES[code]
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.read(n * dtype.itemsize), dtype=dtype).reshape(shape)
        out[name] = arr.astype(dtype.newbyteorder("=")).copy()
    return out


def load_checkpoint(path):
    """Returns a dict with config, params, adam_m, adam_v, step, rng_state."""
    with open(path, "rb") as f:
        r = _Reader(f)
        if r.read(4) != MAGIC:
            raise CheckpointVersionError(f"{path}: bad magic bytes")
        version = r.unpack("<I")
        if version != VERSION:
            raise CheckpointVersionError(f"{path}: unsupported version {version}")
        config = _read_json_block(r)
        params = _read_tensors(r)
        adam_m = _read_tensors(r)
        adam_v = _read_tensors(r)
        step = r.unpack("<Q")
        rng_state = _read_json_block(r)
    return {"config": config, "params": params, "adam_m": adam_m,
            "adam_v": adam_v, "step": step, "rng_state": rng_state}


def restore_params(model, stored):
    """Copy stored arrays into the model's named parameters, validating shapes."""
    current = dict(model.named_parameters())
    if set(current) != set(stored):
        missing = sorted(set(current) ^ set(stored))
        raise CheckpointShapeError(f"parameter set mismatch near {missing[:4]}")
    for name, p in current.items():
        arr = stored[name]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise CheckpointShapeError(
                f"shape mismatch for {name}: checkpoint {arr.shape} vs "
                f"model {p.data.shape}")
        p.data = arr.astype(p.data.dtype, copy=True)
