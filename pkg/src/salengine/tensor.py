"""Dense float32 tensor value type plus the raw "VNTS" tensor file format.

Feature maps are laid out [channels, time, height, width]; convolution
weights are [out_ch, in_ch_per_group, kt, kh, kw]. Data is always
row-major (C order) float32, so a reshape is a pure reinterpretation of
the flat buffer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, FormatError

_MAGIC = b"VNTS"
_VERSION = 1


def _as_f32(data: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


@dataclass(frozen=True)
class Tensor:
    """Immutable dense float32 array with explicit dims.

    Tensors that flow through a graph always have every dim >= 1; a
    zero-size channel dim is tolerated at construction so that
    concatenation with an empty operand is well defined.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_f32(self.data))
        self.data.flags.writeable = False

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def tolist(self):
        return self.data.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.data, other.data)

    @staticmethod
    def from_flat(dims: Sequence[int], flat: Sequence[float]) -> "Tensor":
        arr = np.asarray(flat, dtype=np.float32)
        if arr.size != int(np.prod(dims)):
            raise DimensionError(
                f"flat buffer of {arr.size} elements cannot fill dims {tuple(dims)}"
            )
        return Tensor(arr.reshape(tuple(dims)))

    @staticmethod
    def zeros(dims: Sequence[int]) -> "Tensor":
        return Tensor(np.zeros(tuple(dims), dtype=np.float32))

    @staticmethod
    def full(dims: Sequence[int], value: float) -> "Tensor":
        return Tensor(np.full(tuple(dims), value, dtype=np.float32))


def reshape(t: Tensor, new_dims: Sequence[int]) -> Tensor:
    """Reinterpret the flat buffer under new dims (zero-copy view)."""
    new_dims = tuple(int(d) for d in new_dims)
    if int(np.prod(new_dims)) != t.size:
        raise DimensionError(
            f"cannot reshape {t.dims} ({t.size} elements) to {new_dims}"
        )
    return Tensor(t.data.reshape(new_dims))


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the leading (channel) axis, a's channels first."""
    if len(a.dims) != len(b.dims) or a.dims[1:] != b.dims[1:]:
        raise DimensionError(
            f"non-channel dims differ: {a.dims} vs {b.dims}"
        )
    if b.dims[0] == 0:
        return a
    if a.dims[0] == 0:
        return b
    return Tensor(np.concatenate([a.data, b.data], axis=0))


def pixelwise_mean(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (a + b) / 2; both tensors must agree on all dims."""
    if a.dims != b.dims:
        raise DimensionError(f"dims differ: {a.dims} vs {b.dims}")
    return Tensor((a.data + b.data) * np.float32(0.5))


def write_tensor(t: Tensor, path: str | Path) -> None:
    """Write a tensor as a VNTS file (magic, version, dims, f32 payload)."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(t.dims)))
        fh.write(struct.pack(f"<{len(t.dims)}Q", *t.dims))
        fh.write(t.data.astype("<f4", copy=False).tobytes())


def read_tensor(path: str | Path) -> Tensor:
    """Read a VNTS file back into a Tensor."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise FormatError(f"{path}: not a VNTS file")
    version, ndim = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported VNTS version {version}")
    header_end = 12 + 8 * ndim
    if len(blob) < header_end:
        raise FormatError(f"{path}: truncated VNTS header")
    dims = struct.unpack_from(f"<{ndim}Q", blob, 12)
    count = int(np.prod(dims)) if dims else 0
    payload = blob[header_end:]
    if len(payload) != 4 * count:
        raise FormatError(
            f"{path}: payload holds {len(payload) // 4} floats, dims need {count}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return Tensor(arr.astype(np.float32))
