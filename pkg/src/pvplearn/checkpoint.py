"""Binary checkpoints for trained prompt state (the PVPC container).

Layout, little-endian:

    magic b"PVPC" | u32 version | u8 stage | 3 reserved zero bytes
    u32 meta length | canonical JSON metadata
    u32 section count
    per section: u32 name length | name utf-8 | u32 ndim
                 | u32 extent per axis | float64 payload

Metadata carries the seed, resolved hyperparameters, class names, the
digest of the encoder pair the state was trained against, and enough
encoder config to rebuild that pair. Sections are written in sorted name
order and values stay float64, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DigestMismatchError, FormatError, ParameterError

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint"]

MAGIC = b"PVPC"
VERSION = 1
STAGES = (1, 2)


@dataclass
class Checkpoint:
    """Prompt state plus the metadata needed to reproduce or verify it."""

    stage: int
    meta: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ParameterError(f"stage must be one of {STAGES}, got {self.stage}")
        for name, arr in self.tensors.items():
            self.tensors[name] = np.asarray(arr, dtype=np.float64)

    def require(self, name: str) -> np.ndarray:
        if name not in self.tensors:
            raise FormatError(f"checkpoint is missing tensor {name!r}")
        return self.tensors[name]


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    meta_blob = json.dumps(ckpt.meta, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )
    parts = [
        struct.pack("<4sIB3x", MAGIC, VERSION, ckpt.stage),
        struct.pack("<I", len(meta_blob)),
        meta_blob,
        struct.pack("<I", len(ckpt.tensors)),
    ]
    for name in sorted(ckpt.tensors):
        arr = ckpt.tensors[name]
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path, expected_encoder_digest: str | None = None) -> Checkpoint:
    """Read a checkpoint, optionally enforcing the encoder it was trained on."""
    blob = Path(path).read_bytes()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise FormatError(
                f"truncated {what}: needed {n} bytes at offset {off}, "
                f"file has {len(blob) - off}"
            )
        chunk = blob[off : off + n]
        off += n
        return chunk

    magic, version, stage = struct.unpack("<4sIB", take(12, "header")[:9])
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    if stage not in STAGES:
        raise FormatError(f"unknown stage byte {stage} at offset 8")
    (meta_len,) = struct.unpack("<I", take(4, "meta length"))
    meta_off = off
    try:
        meta = json.loads(take(meta_len, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad metadata JSON at offset {meta_off}: {exc}") from exc
    (count,) = struct.unpack("<I", take(4, "section count"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "section name length"))
        name = take(name_len, "section name").decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4, f"ndim of {name!r}"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, f"extents of {name!r}"))
        n_items = int(np.prod(shape)) if ndim else 1
        payload = take(8 * n_items, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    if off != len(blob):
        raise FormatError(f"{len(blob) - off} trailing bytes at offset {off}")
    ckpt = Checkpoint(stage=stage, meta=meta, tensors=tensors)
    if expected_encoder_digest is not None:
        found = meta.get("encoder_digest")
        if found != expected_encoder_digest:
            raise DigestMismatchError(
                f"checkpoint was trained against encoder {found}, "
                f"expected {expected_encoder_digest}"
            )
    return ckpt
