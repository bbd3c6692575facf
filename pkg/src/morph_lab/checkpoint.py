"""Self-describing checkpoint files for the neural decoder.

Layout: 8-byte magic ``MORPHNN1``, a u32 little-endian header length, the
UTF-8 JSON header (format version, model spec, metadata, tensor list), then
every tensor as little-endian float32 in header order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from morph_lab.errors import DatasetIOError, ShapeError
from morph_lab.neural import Checkpoint, ModelSpec

MAGIC = b"MORPHNN1"
FORMAT_VERSION = 1


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    tensors = [
        {"name": name, "shape": list(arr.shape)} for name, arr in ckpt.state.items()
    ]
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "model_spec": ckpt.model_spec.to_dict(),
            "metadata": ckpt.metadata,
            "tensors": tensors,
        },
        sort_keys=True,
    ).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes() for arr in ckpt.state.values()
    )
    return MAGIC + struct.pack("<I", len(header)) + header + blob


def decode_checkpoint(raw: bytes) -> Checkpoint:
    if len(raw) < 12:
        raise ShapeError(f"checkpoint of {len(raw)} bytes is shorter than its preamble")
    if raw[:8] != MAGIC:
        raise ShapeError("not a MORPHNN1 checkpoint (bad magic)")
    (n_header,) = struct.unpack_from("<I", raw, 8)
    if 12 + n_header > len(raw):
        raise ShapeError("checkpoint truncated inside its header")
    try:
        header = json.loads(raw[12:12 + n_header].decode("utf-8"))
    except ValueError as e:
        raise ShapeError(f"checkpoint header is not valid JSON: {e}") from e
    if not isinstance(header, dict) or not {"model_spec", "metadata", "tensors"} <= header.keys():
        raise ShapeError("checkpoint header lacks model_spec, metadata or tensors")
    if header.get("format_version") != FORMAT_VERSION:
        raise ShapeError(f"unsupported checkpoint version {header.get('format_version')}")
    offset = 12 + n_header
    state: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if offset + 4 * count > len(raw):
            raise ShapeError(f"checkpoint truncated inside tensor {entry['name']}")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        state[entry["name"]] = arr.astype(np.float32).reshape(shape)
        offset += 4 * count
    return Checkpoint(ModelSpec.from_dict(header["model_spec"]), state, header["metadata"])


def save_checkpoint(ckpt: Checkpoint, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(ckpt))
    except OSError as e:
        raise DatasetIOError(path, e) from e
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DatasetIOError(path, e) from e
    return decode_checkpoint(raw)
