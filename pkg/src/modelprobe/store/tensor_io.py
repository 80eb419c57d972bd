"""Raw tensor blob reading and writing.

Blobs are little-endian, row-major, with no framing: the byte length must
equal element-size times the product of the declared shape.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import DTYPES, Tensor, TensorFormatError, TensorRef


def read_tensor(ref: TensorRef) -> Tensor:
    """Decode a blob into its declared shape; validates length and dtype."""
    if ref.dtype not in DTYPES:
        raise TensorFormatError(f"unknown dtype: {ref.dtype}")
    raw = Path(ref.blob).read_bytes()
    if len(raw) != ref.num_bytes:
        raise TensorFormatError(
            f"length mismatch for {ref.blob}: expected {ref.num_bytes} bytes "
            f"for shape {list(ref.shape)}, found {len(raw)}"
        )
    values = np.frombuffer(raw, dtype=DTYPES[ref.dtype]).reshape(ref.shape)
    return Tensor(dtype=ref.dtype, shape=ref.shape, values=values)


def write_tensor(path: Path, values: np.ndarray, dtype: str) -> TensorRef:
    """Write values as a raw blob and return the matching ref."""
    if dtype not in DTYPES:
        raise TensorFormatError(f"unknown dtype: {dtype}")
    arr = np.ascontiguousarray(values, dtype=DTYPES[dtype])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(arr.tobytes())
    return TensorRef(dtype=dtype, shape=tuple(arr.shape), blob=path)


def check_blob_length(ref: TensorRef) -> None:
    """Validate on-disk byte length against the declared shape (no read)."""
    if ref.dtype not in DTYPES:
        raise TensorFormatError(f"unknown dtype: {ref.dtype}")
    blob = Path(ref.blob)
    if not blob.exists():
        raise TensorFormatError(f"missing blob: {blob}")
    actual = blob.stat().st_size
    if actual != ref.num_bytes:
        raise TensorFormatError(
            f"length mismatch for {blob}: expected {ref.num_bytes} bytes "
            f"for shape {list(ref.shape)}, found {actual}"
        )
