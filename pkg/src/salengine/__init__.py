"""salengine: CPU inference engine and evaluation toolkit for the
grouped-convolution video saliency model family (single-path inception
encoder, two-pathway action encoder, and their pixelwise-mean ensemble).
"""

from .errors import (
    ConfigError,
    CorruptionError,
    DegenerateMapError,
    DimensionError,
    EngineError,
    ExtraWeightError,
    FormatError,
    MissingWeightError,
    ShapeMismatchError,
    UsageError,
)
from .graph import GraphConfig, LayerSpec, ParamCounts
from .models import Variant, build_s3d_encoder, build_slowfast_encoder, build_vinet_a, build_vinet_s
from .ops import Conv3dParams
from .pipeline import BenchReport, FrameWindow, SaliencyMap, WindowPlan, bench, ensemble, make_windows, predict
from .tensor import Tensor, concat_channels, pixelwise_mean, read_tensor, reshape, write_tensor
from .weights import BoundModel, WeightStore, bind, random_init, read_container, write_container

__version__ = "0.1.0"

__all__ = [
    "BenchReport",
    "BoundModel",
    "ConfigError",
    "Conv3dParams",
    "CorruptionError",
    "DegenerateMapError",
    "DimensionError",
    "EngineError",
    "ExtraWeightError",
    "FormatError",
    "FrameWindow",
    "GraphConfig",
    "LayerSpec",
    "MissingWeightError",
    "ParamCounts",
    "SaliencyMap",
    "ShapeMismatchError",
    "Tensor",
    "UsageError",
    "Variant",
    "WeightStore",
    "WindowPlan",
    "bench",
    "bind",
    "build_s3d_encoder",
    "build_slowfast_encoder",
    "build_vinet_a",
    "build_vinet_s",
    "concat_channels",
    "ensemble",
    "make_windows",
    "pixelwise_mean",
    "predict",
    "random_init",
    "read_container",
    "read_tensor",
    "reshape",
    "write_container",
    "write_tensor",
]
