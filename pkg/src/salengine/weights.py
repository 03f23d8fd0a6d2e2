"""Bit-exact "VNWT" weight container, graph binding and the executable
model.

Container layout (all little-endian): magic "VNWT", u32 version=1,
u32 entry count; per entry: u32 name length, UTF-8 name, u8 dtype code
(0 = f32), u32 ndim, ndim x u64 dims, u32 CRC32 of the payload, then the
f32 payload. Entry names are "<layer>.weight" / "<layer>.bias".
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from . import ops
from .errors import (
    CorruptionError,
    DimensionError,
    ExtraWeightError,
    FormatError,
    MissingWeightError,
    ShapeMismatchError,
)
from .graph import INPUT, GraphConfig, conv_params
from .tensor import Tensor

_MAGIC = b"VNWT"
_VERSION = 1
_DTYPE_F32 = 0


def _crc(arr: np.ndarray) -> int:
    return zlib.crc32(arr.astype("<f4", copy=False).tobytes()) & 0xFFFFFFFF


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    dims: tuple[int, ...]
    crc32: int


@dataclass(frozen=True)
class WeightStore:
    """Immutable named-tensor collection plus its integrity manifest."""

    entries: Mapping[str, Tensor]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __getitem__(self, name: str) -> Tensor:
        return self.entries[name]

    @property
    def total_params(self) -> int:
        return sum(t.size for t in self.entries.values())

    def manifest(self) -> list[ManifestEntry]:
        return [
            ManifestEntry(name=n, dims=t.dims, crc32=_crc(t.data))
            for n, t in self.entries.items()
        ]

    def without(self, name: str) -> "WeightStore":
        kept = {n: t for n, t in self.entries.items() if n != name}
        return WeightStore(kept)

    def with_entry(self, name: str, tensor: Tensor) -> "WeightStore":
        merged = dict(self.entries)
        merged[name] = tensor
        return WeightStore(merged)


def write_container(store: WeightStore, path: str | Path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(store.entries)))
        for name, tensor in store.entries.items():
            raw = name.encode("utf-8")
            payload = tensor.data.astype("<f4", copy=False).tobytes()
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BI", _DTYPE_F32, len(tensor.dims)))
            fh.write(struct.pack(f"<{len(tensor.dims)}Q", *tensor.dims))
            fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
            fh.write(payload)


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CorruptionError(f"{self.path}: truncated container")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_container(path: str | Path) -> WeightStore:
    """Read and CRC-validate a VNWT container; no partial store on error."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise FormatError(f"{path}: not a VNWT container")
    r = _Reader(blob, path)
    r.pos = 4
    version, count = r.unpack("<II")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported VNWT version {version}")
    entries: dict[str, Tensor] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        name = r.take(name_len).decode("utf-8")
        dtype, ndim = r.unpack("<BI")
        if dtype != _DTYPE_F32:
            raise FormatError(f"{path}: entry '{name}' has unknown dtype {dtype}")
        dims = r.unpack(f"<{ndim}Q")
        if any(d < 1 for d in dims):
            raise FormatError(f"{path}: entry '{name}' has invalid dims {dims}")
        (crc,) = r.unpack("<I")
        payload = r.take(4 * int(np.prod(dims)))
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise CorruptionError(f"{path}: CRC mismatch in entry '{name}'")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
        if name in entries:
            raise FormatError(f"{path}: duplicate entry '{name}'")
        entries[name] = Tensor(arr.astype(np.float32))
    if r.pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - r.pos} trailing bytes")
    return WeightStore(entries)


def expected_entries(graph: GraphConfig) -> dict[str, tuple[int, ...]]:
    """Entry name -> dims required to bind the graph."""
    out: dict[str, tuple[int, ...]] = {}
    for spec in graph.learnable_layers():
        cp = conv_params(spec)
        out[f"{spec.name}.weight"] = cp.weight_dims
        if cp.has_bias:
            out[f"{spec.name}.bias"] = (cp.out_ch,)
    return out


def random_init(graph: GraphConfig, seed: int) -> WeightStore:
    """Deterministic uniform(-0.05, 0.05) weights with zero biases."""
    rng = np.random.default_rng(seed)
    entries: dict[str, Tensor] = {}
    for spec in graph.learnable_layers():
        cp = conv_params(spec)
        w = rng.uniform(-0.05, 0.05, size=cp.weight_dims).astype(np.float32)
        entries[f"{spec.name}.weight"] = Tensor(w)
        if cp.has_bias:
            entries[f"{spec.name}.bias"] = Tensor.zeros((cp.out_ch,))
    return WeightStore(entries)


def bind(graph: GraphConfig, store: WeightStore) -> "BoundModel":
    """Validate store coverage against the graph and produce an
    executable model. Exactly one outcome: a model, or the first
    applicable of MissingWeightError / ExtraWeightError /
    ShapeMismatchError, each listing every offending entry."""
    expected = expected_entries(graph)
    missing = sorted(n for n in expected if n not in store)
    if missing:
        raise MissingWeightError(missing)
    extra = sorted(n for n in store if n not in expected)
    if extra:
        raise ExtraWeightError(extra)
    bad = sorted(n for n, dims in expected.items() if store[n].dims != dims)
    if bad:
        raise ShapeMismatchError(bad)
    return BoundModel(graph=graph, store=store)


class BoundModel:
    """A graph plus validated weights; immutable and thread-safe to run."""

    def __init__(self, graph: GraphConfig, store: WeightStore):
        self.graph = graph
        self.store = store
        self._shapes = graph.infer_shapes()
        # Index of the last layer consuming each value, for early release.
        last_use: dict[str, int] = {}
        for i, spec in enumerate(graph.layers):
            for src in spec.inputs:
                last_use[src] = i
        self._last_use = last_use

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.graph.input_shape

    def tap_shape(self, tap: str) -> tuple[int, ...]:
        return self._shapes[self.graph.taps[tap]]

    def run(self, x: Tensor, taps: tuple[str, ...] = ("saliency",)) -> dict[str, Tensor]:
        """Forward pass; returns the requested taps by name."""
        if x.dims != self.graph.input_shape:
            raise DimensionError(
                f"input dims {x.dims} do not match graph input "
                f"{self.graph.input_shape}"
            )
        wanted_layers = {}
        for tap in taps:
            if tap not in self.graph.taps:
                raise DimensionError(f"graph has no tap '{tap}'")
            wanted_layers.setdefault(self.graph.taps[tap], []).append(tap)
        values: dict[str, Tensor] = {INPUT: x}
        out: dict[str, Tensor] = {}
        for i, spec in enumerate(self.graph.layers):
            values[spec.name] = self._apply(spec, [values[s] for s in spec.inputs])
            for tap in wanted_layers.get(spec.name, ()):
                out[tap] = values[spec.name]
            for src in list(spec.inputs):
                if self._last_use.get(src) == i and src in values:
                    del values[src]
        return out

    def run_saliency(self, x: Tensor) -> Tensor:
        return self.run(x, taps=("saliency",))["saliency"]

    def _apply(self, spec, inputs: list[Tensor]) -> Tensor:
        kind = spec.kind
        x = inputs[0]
        if kind in ("conv3d", "pointwise"):
            cp = conv_params(spec)
            w = self.store[f"{spec.name}.weight"]
            b = self.store[f"{spec.name}.bias"] if cp.has_bias else None
            return ops.conv3d(x, w, b, cp)
        if kind == "shuffle":
            return ops.channel_shuffle(x, int(spec.params["groups"]))
        if kind == "upsample":
            scale = spec.params.get("scale")
            if scale is not None:
                return ops.trilinear_upsample(x, scale=tuple(scale))
            return ops.trilinear_upsample(x, size=tuple(spec.params["size"]))
        if kind == "maxpool":
            return ops.max_pool3d(
                x,
                tuple(spec.params["kernel"]),
                tuple(spec.params.get("stride", spec.params["kernel"])),
                tuple(spec.params.get("padding", (0, 0, 0))),
            )
        if kind == "adaptive_pool_t":
            return ops.adaptive_max_pool_t(x, int(spec.params["t_out"]))
        if kind == "relu":
            return ops.relu(x)
        if kind == "sigmoid":
            return ops.sigmoid(x)
        if kind == "add":
            return ops.add(inputs[0], inputs[1])
        if kind == "reshape_fast":
            factor = int(spec.params.get("factor", 2))
            c, t, h, w = x.dims
            return Tensor(x.data.reshape(c * factor, t // factor, h, w))
        if kind == "concat_skip":
            base = inputs[0]
            parts = [base.data]
            for other in inputs[1:]:
                if other.dims[1:] != base.dims[1:]:
                    other = ops.trilinear_upsample(other, size=base.dims[1:])
                parts.append(other.data)
            return Tensor(np.concatenate(parts, axis=0))
        raise DimensionError(f"layer '{spec.name}': no executor for kind '{kind}'")
