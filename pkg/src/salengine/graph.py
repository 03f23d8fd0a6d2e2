"""Declarative layer graphs: specs, validation, shape inference and
parameter counting.

A graph is an ordered list of named layers; every layer consumes the
graph input ("input") or earlier layers, so the declaration order is
already a topological order. Named taps select the layers whose outputs
callers care about (hierarchical features, fused features, the saliency
head).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

from .errors import ConfigError
from .ops import Conv3dParams

INPUT = "input"

KINDS = frozenset(
    {
        "conv3d",
        "pointwise",
        "shuffle",
        "upsample",
        "maxpool",
        "adaptive_pool_t",
        "relu",
        "sigmoid",
        "concat_skip",
        "reshape_fast",
        "add",
    }
)

LEARNABLE_KINDS = frozenset({"conv3d", "pointwise"})


def _triple(value, what: str) -> tuple[int, int, int]:
    try:
        t = tuple(int(v) for v in value)
    except TypeError:
        t = (int(value),) * 3
    if len(t) != 3:
        raise ConfigError(f"{what} must have three entries, got {value!r}")
    return t


@dataclass(frozen=True)
class LayerSpec:
    """One node of a graph: a kind, kind-specific params and its inputs."""

    name: str
    kind: str
    inputs: tuple[str, ...]
    params: Mapping[str, Any] = field(default_factory=dict)
    scope: str = ""
    bn: str | None = None  # name of the batch-norm folded into this conv

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "params", dict(self.params))
        if self.kind not in KINDS:
            raise ConfigError(f"layer '{self.name}': unknown kind '{self.kind}'")
        if not self.inputs:
            raise ConfigError(f"layer '{self.name}': needs at least one input")


def conv_params(spec: LayerSpec) -> Conv3dParams:
    """Conv3dParams for a conv3d or pointwise layer spec."""
    p = spec.params
    try:
        if spec.kind == "pointwise":
            return Conv3dParams(
                in_ch=int(p["in_ch"]),
                out_ch=int(p["out_ch"]),
                kernel=(1, 1, 1),
                has_bias=bool(p.get("bias", True)),
            )
        if spec.kind == "conv3d":
            return Conv3dParams(
                in_ch=int(p["in_ch"]),
                out_ch=int(p["out_ch"]),
                kernel=_triple(p["kernel"], "kernel"),
                stride=_triple(p.get("stride", 1), "stride"),
                padding=_triple(p.get("padding", 0), "padding"),
                dilation=_triple(p.get("dilation", 1), "dilation"),
                groups=int(p.get("groups", 1)),
                has_bias=bool(p.get("bias", True)),
            )
    except KeyError as exc:
        raise ConfigError(f"layer '{spec.name}': missing conv param {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"layer '{spec.name}': {exc}") from exc
    raise ConfigError(f"layer '{spec.name}' ({spec.kind}) has no conv params")


def _infer_one(spec: LayerSpec, in_dims: list[tuple[int, ...]]) -> tuple[int, ...]:
    name, kind = spec.name, spec.kind

    def fail(msg: str):
        raise ConfigError(f"layer '{name}': {msg}")

    if kind in ("relu", "sigmoid"):
        return in_dims[0]

    if kind == "add":
        if len(in_dims) != 2 or in_dims[0] != in_dims[1]:
            fail(f"add needs two equal-dim inputs, got {in_dims}")
        return in_dims[0]

    if kind == "concat_skip":
        base = in_dims[0]
        for d in in_dims[1:]:
            if len(d) != len(base):
                fail(f"concat rank mismatch: {d} vs {base}")
        return (sum(d[0] for d in in_dims),) + base[1:]

    x = in_dims[0]
    if len(x) != 4:
        fail(f"expects a [C,T,H,W] input, got {x}")
    c, t, h, w = x

    if kind in LEARNABLE_KINDS:
        cp = conv_params(spec)
        if c != cp.in_ch:
            fail(f"input has {c} channels, conv declares in_ch={cp.in_ch}")
        out = (
            cp.out_ch,
            cp.out_extent(0, t),
            cp.out_extent(1, h),
            cp.out_extent(2, w),
        )
        if min(out[1:]) < 1:
            fail(f"conv output {out} is empty for input {x}")
        return out

    if kind == "shuffle":
        g = int(spec.params["groups"])
        if g < 1 or c % g:
            fail(f"shuffle groups={g} does not divide {c} channels")
        return x

    if kind == "upsample":
        scale = spec.params.get("scale")
        size = spec.params.get("size")
        if (scale is None) == (size is None):
            fail("upsample needs exactly one of scale/size")
        if scale is not None:
            st, sh, sw = _triple(scale, "scale")
            if min(st, sh, sw) < 1:
                fail(f"upsample scale must be >= 1, got {scale}")
            return (c, t * st, h * sh, w * sw)
        ts, hs, ws = _triple(size, "size")
        if min(ts, hs, ws) < 1:
            fail(f"upsample size must be positive, got {size}")
        return (c, ts, hs, ws)

    if kind == "maxpool":
        kernel = _triple(spec.params["kernel"], "kernel")
        stride = _triple(spec.params.get("stride", kernel), "stride")
        padding = _triple(spec.params.get("padding", 0), "padding")
        if any(p >= k for p, k in zip(padding, kernel)):
            fail("pool padding must be smaller than the kernel")
        out = tuple(
            (n + 2 * p - k) // s + 1
            for n, k, s, p in zip((t, h, w), kernel, stride, padding)
        )
        if min(out) < 1:
            fail(f"pool window {kernel} larger than padded input {x}")
        return (c, *out)

    if kind == "adaptive_pool_t":
        t_out = int(spec.params["t_out"])
        if t_out < 1 or t_out > t:
            fail(f"adaptive_pool_t t_out={t_out} not in [1, {t}]")
        return (c, t_out, h, w)

    if kind == "reshape_fast":
        factor = int(spec.params.get("factor", 2))
        if factor < 1 or t % factor:
            fail(f"reshape_fast factor={factor} does not divide T={t}")
        return (c * factor, t // factor, h, w)

    fail(f"no shape rule for kind '{kind}'")


@dataclass(frozen=True)
class GraphConfig:
    """An ordered layer list plus named output taps and the input shape."""

    name: str
    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...]
    taps: Mapping[str, str] = field(default_factory=dict)
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "taps", dict(self.taps))
        object.__setattr__(self, "meta", dict(self.meta))
        self._validate()

    def _validate(self):
        if len(self.input_shape) != 4 or min(self.input_shape) < 1:
            raise ConfigError(f"input_shape must be [C,T,H,W] >= 1, got {self.input_shape}")
        seen = {INPUT}
        for spec in self.layers:
            if spec.name in seen:
                raise ConfigError(f"duplicate or reserved layer name '{spec.name}'")
            for src in spec.inputs:
                if src not in seen:
                    raise ConfigError(
                        f"layer '{spec.name}' consumes undeclared input '{src}'"
                    )
            seen.add(spec.name)
        for tap, target in self.taps.items():
            if target not in seen or target == INPUT:
                raise ConfigError(f"tap '{tap}' points at unknown layer '{target}'")

    def __iter__(self) -> Iterator[LayerSpec]:
        return iter(self.layers)

    def layer(self, name: str) -> LayerSpec:
        for spec in self.layers:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def infer_shapes(
        self, input_shape: Sequence[int] | None = None
    ) -> dict[str, tuple[int, ...]]:
        """Static per-layer output shapes; raises ConfigError naming the
        first inconsistent layer."""
        shapes: dict[str, tuple[int, ...]] = {
            INPUT: tuple(int(d) for d in (input_shape or self.input_shape))
        }
        for spec in self.layers:
            shapes[spec.name] = _infer_one(spec, [shapes[s] for s in spec.inputs])
        return shapes

    def tap_shape(self, tap: str, shapes: dict | None = None) -> tuple[int, ...]:
        shapes = shapes or self.infer_shapes()
        return shapes[self.taps[tap]]

    def learnable_layers(self) -> list[LayerSpec]:
        return [s for s in self.layers if s.kind in LEARNABLE_KINDS]

    def count_parameters(self) -> "ParamCounts":
        per_layer: dict[str, int] = {}
        by_scope: dict[str, int] = {}
        for spec in self.learnable_layers():
            n = conv_params(spec).param_count()
            per_layer[spec.name] = n
            scope = spec.scope or "other"
            by_scope[scope] = by_scope.get(scope, 0) + n
        return ParamCounts(per_layer=per_layer, by_scope=by_scope)

    # --- serialization -------------------------------------------------

    def to_json_dict(self) -> dict:
        layers = []
        for spec in self.layers:
            entry: dict[str, Any] = {
                "name": spec.name,
                "kind": spec.kind,
                "inputs": list(spec.inputs),
                "params": dict(spec.params),
            }
            if spec.scope:
                entry["scope"] = spec.scope
            if spec.bn:
                entry["bn"] = spec.bn
            layers.append(entry)
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": layers,
            "taps": dict(self.taps),
            "meta": dict(self.meta),
        }

    @staticmethod
    def from_json_dict(obj: Mapping[str, Any]) -> "GraphConfig":
        try:
            layers = tuple(
                LayerSpec(
                    name=e["name"],
                    kind=e["kind"],
                    inputs=tuple(e["inputs"]),
                    params=e.get("params", {}),
                    scope=e.get("scope", ""),
                    bn=e.get("bn"),
                )
                for e in obj["layers"]
            )
            return GraphConfig(
                name=obj.get("name", "graph"),
                input_shape=tuple(obj["input_shape"]),
                layers=layers,
                taps=obj.get("taps", {}),
                meta=obj.get("meta", {}),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed graph config: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @staticmethod
    def load(path: str | Path) -> "GraphConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return GraphConfig.from_json_dict(obj)


@dataclass(frozen=True)
class ParamCounts:
    """Analytic parameter counts, per layer and per named subgraph."""

    per_layer: Mapping[str, int]
    by_scope: Mapping[str, int]

    @property
    def total(self) -> int:
        return sum(self.per_layer.values())

    def scope_total(self, scope: str) -> int:
        return self.by_scope.get(scope, 0)


def decoder_group_schedule(graph: GraphConfig) -> list[int]:
    """Group counts of the decoder's grouped convolutions, in layer order."""
    return [
        int(s.params.get("groups", 1))
        for s in graph.layers
        if s.scope == "decoder" and s.kind == "conv3d"
    ]


def decoder_shuffle_after(graph: GraphConfig) -> list[bool]:
    """For each decoder conv3d, whether a shuffle directly consumes it."""
    convs = [s.name for s in graph.layers if s.scope == "decoder" and s.kind == "conv3d"]
    shuffled = {
        s.inputs[0]
        for s in graph.layers
        if s.kind == "shuffle" and s.scope == "decoder"
    }
    return [c in shuffled for c in convs]
