"""
Binary checkpoint format for parameter tensors.

Layout (all integers little-endian):
    magic  b"MMX1"
    u32    version
    u32    entry count
    per entry: u8 kind tag, u32 ndim, ndim x u32 dims
    payload: every entry's values as flat little-endian f64, in entry order
"""
import logging
import struct
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"MMX1"
VERSION = 1

KIND_TAGS = {"dense": 1, "conv2d": 2}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}

CheckpointEntry = Tuple[str, np.ndarray]


def encode_checkpoint(entries: Sequence[CheckpointEntry]) -> bytes:
    header = bytearray(MAGIC)
    header += struct.pack("<II", VERSION, len(entries))
    payload = bytearray()
    for kind, arr in entries:
        if kind not in KIND_TAGS:
            raise CheckpointError(f"Unknown layer kind '{kind}' for checkpoint")
        header += struct.pack("<BI", KIND_TAGS[kind], arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return bytes(header + payload)


def decode_checkpoint(blob: bytes) -> List[CheckpointEntry]:
    """
    Parse checkpoint bytes.

    Raises:
        CheckpointError: On bad magic, unsupported version or truncated data
    """
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointError("Not an MMX1 checkpoint", {"magic": blob[:4]})
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError("Unsupported checkpoint version", {"version": version})

    offset = 12
    layout = []
    try:
        for _ in range(count):
            tag, ndim = struct.unpack_from("<BI", blob, offset)
            offset += 5
            dims = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
            if tag not in TAG_KINDS:
                raise CheckpointError("Unknown kind tag in checkpoint", {"tag": tag})
            layout.append((TAG_KINDS[tag], tuple(dims)))
    except struct.error as e:
        raise CheckpointError("Truncated checkpoint header", {"error": str(e)})

    entries: List[CheckpointEntry] = []
    for kind, dims in layout:
        n = int(np.prod(dims)) if dims else 1
        end = offset + 8 * n
        if end > len(blob):
            raise CheckpointError("Truncated checkpoint payload", {"expected_bytes": end, "actual_bytes": len(blob)})
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).astype(np.float64).reshape(dims)
        entries.append((kind, arr))
        offset = end
    if offset != len(blob):
        raise CheckpointError("Trailing bytes after checkpoint payload", {"extra_bytes": len(blob) - offset})
    return entries


def write_checkpoint(path: Union[str, Path], entries: Sequence[CheckpointEntry]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(entries))
    logger.info(f"Wrote checkpoint with {len(entries)} tensors to {path}")
    return path


def read_checkpoint(path: Union[str, Path]) -> List[CheckpointEntry]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError("Checkpoint file not found", {"path": str(path)})
    return decode_checkpoint(path.read_bytes())
