"""Versioned binary checkpoints.

Layout: the magic bytes ``FGGv1``, a little-endian uint32 header length, a
UTF-8 JSON header, then the raw float64 buffers back to back.  The header
carries the full model config plus a manifest of (name, shape) pairs in
storage order; auxiliary arrays (for example the frequency binner's edges)
use names starting with ``_`` and are returned separately on load.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ContractError
from .model import ModelConfig, Reader

MAGIC = b"FGGv1"


def save_checkpoint(path: str, config: ModelConfig, params: dict[str, np.ndarray],
                    extra: dict[str, np.ndarray] | None = None) -> None:
    entries = list(params.items()) + sorted((extra or {}).items())
    manifest = []
    for name, arr in entries:
        if name.startswith("_") != (extra is not None and name in extra):
            raise ContractError(f"checkpoint: auxiliary arrays must be named "
                                f"with a leading underscore ({name!r})")
        manifest.append({"name": name, "shape": list(np.asarray(arr).shape)})
    header = json.dumps({"config": config.to_dict(), "tensors": manifest},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def load_checkpoint(path: str) -> tuple[ModelConfig, dict[str, np.ndarray],
                                        dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ContractError(f"{path}: not a checkpoint (bad magic {magic!r})")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        params: dict[str, np.ndarray] = {}
        extra: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ContractError(f"{path}: truncated tensor {entry['name']!r}")
            arr = np.frombuffer(buf, dtype=np.float64).reshape(shape).copy()
            (extra if entry["name"].startswith("_") else params)[entry["name"]] = arr
        trailing = fh.read(1)
        if trailing:
            raise ContractError(f"{path}: trailing bytes after tensor section")
    return config, params, extra


def save_reader(path: str, reader: Reader,
                extra: dict[str, np.ndarray] | None = None) -> None:
    save_checkpoint(path, reader.config, reader.params, extra)


def load_reader(path: str) -> tuple[Reader, dict[str, np.ndarray]]:
    """Rebuild a reader with parameters copied in place."""
    config, params, extra = load_checkpoint(path)
    reader = Reader(config, seed=0)
    missing = set(reader.params) ^ set(params)
    if missing:
        raise ContractError(f"{path}: parameter names do not match config: {missing}")
    for name, arr in params.items():
        if reader.params[name].shape != arr.shape:
            raise ContractError(f"{path}: shape mismatch for {name!r}")
        reader.params[name][...] = arr
    return reader, extra
