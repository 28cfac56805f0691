"""Binary checkpoint container.

Layout::

    b"MEDR"  version byte 0x01  uint32 LE header length  JSON header (UTF-8)
    float64 LE arrays, concatenated in header order

The header lists every array as ``{"name", "shape", "offset"}`` with
``offset`` counted in bytes from the start of the array section.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ModelConfig, ParameterStore

MAGIC = b"MEDR"
VERSION = 1

# type tags carried in the header "type_tag" field
TYPE_TAGS = {
    "attention": 0,
    "rnn-joint": 1,
    "rnn-per-station": 2,
    "linreg-joint": 3,
    "linreg-per-station": 4,
    "last-observed": 5,
}


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class CorruptHeaderError(CheckpointError):
    pass


def encode_container(header: dict, arrays: list[tuple[str, np.ndarray]]) -> bytes:
    entries, blobs, offset = [], [], 0
    for name, a in arrays:
        a = np.ascontiguousarray(a, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blob = a.tobytes()
        blobs.append(blob)
        offset += len(blob)
    head = dict(header, arrays=entries)
    hbytes = json.dumps(head, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(hbytes)) + hbytes + b"".join(blobs)


def decode_container(buf: bytes):
    """Returns ``(header, {name: array})`` with arrays in header order."""
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("bad magic: not a checkpoint file")
    if len(buf) < 9:
        raise TruncatedCheckpointError("truncated checkpoint: incomplete preamble")
    if buf[4] != VERSION:
        raise VersionMismatchError(f"unsupported checkpoint version {buf[4]} (expected {VERSION})")
    (hlen,) = struct.unpack("<I", buf[5:9])
    if len(buf) < 9 + hlen:
        raise TruncatedCheckpointError("truncated checkpoint: incomplete header")
    try:
        header = json.loads(buf[9:9 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptHeaderError(f"corrupt checkpoint header: {exc}") from None
    body = memoryview(buf)[9 + hlen:]
    arrays = {}
    for entry in header.get("arrays", []):
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64)) * 8
        start = entry["offset"]
        if start + n > len(body):
            raise TruncatedCheckpointError(f"truncated checkpoint: array {entry['name']!r} incomplete")
        arrays[entry["name"]] = np.frombuffer(body[start:start + n], dtype="<f8").astype(np.float64).reshape(shape)
    return header, arrays


def write_container(path, header: dict, arrays) -> None:
    Path(path).write_bytes(encode_container(header, arrays))


def read_container(path):
    return decode_container(Path(path).read_bytes())


def save_checkpoint(path, cfg: ModelConfig, params: ParameterStore, seed: int | None = None) -> None:
    header = {"type": "attention", "type_tag": TYPE_TAGS["attention"],
              "config": cfg.to_dict(), "seed": seed}
    write_container(path, header, list(params.items()))


def load_checkpoint(path):
    """Returns ``(cfg, params)`` from a single-model checkpoint."""
    header, arrays = read_container(path)
    if "config" not in header:
        raise CorruptHeaderError("checkpoint header has no model config")
    return ModelConfig.from_dict(header["config"]), ParameterStore(arrays)
