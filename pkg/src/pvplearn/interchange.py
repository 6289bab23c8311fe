"""Binary interchange of embedding batches (the PVPE container).

Layout, little-endian throughout:

    offset  size  field
    0       4     magic b"PVPE"
    4       4     u32 format version (currently 1)
    8       4     u32 rows
    12      4     u32 dim
    16      1     u8 role tag
    17      7     reserved, must be zero
    24      ...   rows*dim float32 values, row-major

An optional sidecar at ``<path>.labels`` carries one UTF-8 label per row;
lines starting with '#' are comments. Values are float32 on disk and
float64 in memory, so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError

__all__ = ["EmbeddingBatch", "ROLES", "write_pvpe", "read_pvpe"]

MAGIC = b"PVPE"
VERSION = 1
HEADER_SIZE = 24

# role tag byte is the 1-based position in this tuple
ROLES = ("global_text", "pvp_visual", "text_prompt", "adapted", "test_image")


@dataclass
class EmbeddingBatch:
    """A (rows, dim) block of embeddings with a declared role."""

    values: np.ndarray
    role: str
    labels: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ParameterError(
                f"values must be 2-D, got shape {self.values.shape}"
            )
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ParameterError(f"empty batch: shape {self.values.shape}")
        if self.role not in ROLES:
            raise ParameterError(
                f"unknown role {self.role!r}; expected one of {ROLES}"
            )
        if self.labels is not None and len(self.labels) != self.values.shape[0]:
            raise ParameterError(
                f"{len(self.labels)} labels for {self.values.shape[0]} rows"
            )

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def write_pvpe(path, batch: EmbeddingBatch) -> None:
    """Write the batch; a labels sidecar is written iff labels are present."""
    path = Path(path)
    header = struct.pack(
        "<4sIIIB7x",
        MAGIC,
        VERSION,
        batch.rows,
        batch.dim,
        ROLES.index(batch.role) + 1,
    )
    payload = np.ascontiguousarray(batch.values, dtype="<f4").tobytes()
    path.write_bytes(header + payload)
    if batch.labels is not None:
        sidecar = path.with_name(path.name + ".labels")
        sidecar.write_text("".join(f"{lbl}\n" for lbl in batch.labels), encoding="utf-8")


def read_pvpe(path) -> EmbeddingBatch:
    """Read a batch, picking up the labels sidecar when it exists."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER_SIZE:
        raise FormatError(
            f"truncated header: expected {HEADER_SIZE} bytes, got {len(blob)} (at offset 0)"
        )
    magic, version, rows, dim, role_tag = struct.unpack_from("<4sIIIB", blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    if rows < 1 or dim < 1:
        raise FormatError(f"degenerate extents rows={rows} dim={dim} at offset 8")
    if not 1 <= role_tag <= len(ROLES):
        raise FormatError(f"unknown role tag {role_tag} at offset 16")
    if any(blob[17:24]):
        raise FormatError("reserved bytes not zero at offset 17")
    expected = rows * dim * 4
    actual = len(blob) - HEADER_SIZE
    if actual != expected:
        raise FormatError(
            f"payload at offset {HEADER_SIZE}: expected {expected} bytes, got {actual}"
        )
    values = (
        np.frombuffer(blob, dtype="<f4", count=rows * dim, offset=HEADER_SIZE)
        .astype(np.float64)
        .reshape((rows, dim))
    )
    labels = None
    sidecar = path.with_name(path.name + ".labels")
    if sidecar.exists():
        lines = sidecar.read_text(encoding="utf-8").splitlines()
        labels = [ln for ln in lines if not ln.startswith("#")]
        if len(labels) != rows:
            raise FormatError(
                f"labels sidecar has {len(labels)} entries for {rows} rows"
            )
    return EmbeddingBatch(values=values, role=ROLES[role_tag - 1], labels=labels)
