"""Frame-window construction, forward passes, two-model ensembling and
throughput benchmarking.

Windowing rules: the inception-backbone variant consumes 32 consecutive
frames and predicts the last one; the two-pathway variant samples every
alternate frame from a 64-frame span centered so the predicted frame is
the span's 33rd. Frames outside [0, video_len) are clamped, which also
serves the left edge by repeating frame 0.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, UsageError
from .models import Variant
from .ops import trilinear_upsample
from .tensor import Tensor, pixelwise_mean
from .weights import BoundModel

WINDOW_LEN = 32


@dataclass(frozen=True)
class WindowPlan:
    """Source-frame indices feeding one prediction."""

    target: int
    indices: tuple[int, ...]


def make_windows(video_len: int, variant: Variant) -> list[WindowPlan]:
    """One plan per video frame; every frame is targeted exactly once."""
    if video_len < 1:
        raise UsageError(f"video_len must be >= 1, got {video_len}")

    def clamp(i: int) -> int:
        return min(max(i, 0), video_len - 1)

    plans = []
    for t in range(video_len):
        if variant == Variant.VINET_S:
            raw = range(t - WINDOW_LEN + 1, t + 1)
        else:
            raw = range(t - WINDOW_LEN, t + WINDOW_LEN, 2)
        plans.append(WindowPlan(target=t, indices=tuple(clamp(i) for i in raw)))
    return plans


@dataclass(frozen=True)
class FrameWindow:
    """A model-ready clip: 32 RGB frames in [0,1] plus the target index."""

    frames: Tensor
    target_index: int
    variant: Variant

    def __post_init__(self):
        d = self.frames.dims
        if len(d) != 4 or d[0] != 3 or d[1] != WINDOW_LEN:
            raise DimensionError(
                f"window frames must be [3,{WINDOW_LEN},H,W], got {d}"
            )
        lo = float(self.frames.data.min())
        hi = float(self.frames.data.max())
        if lo < 0.0 or hi > 1.0:
            raise UsageError(f"frame values must lie in [0,1], got [{lo}, {hi}]")


@dataclass(frozen=True)
class SaliencyMap:
    """Continuous prediction in (0,1) for one source frame."""

    values: Tensor
    frame_index: int

    def plane(self) -> np.ndarray:
        return self.values.data.reshape(self.values.dims[-2:])


def assemble_window(
    plan: WindowPlan,
    get_frame: Callable[[int], np.ndarray],
    variant: Variant,
) -> FrameWindow:
    """Stack the planned frames ([3,H,W] each, values in [0,1])."""
    stack = np.stack([np.asarray(get_frame(i), dtype=np.float32) for i in plan.indices], axis=1)
    return FrameWindow(frames=Tensor(stack), target_index=plan.target, variant=variant)


def _normalize(model: BoundModel, frames: Tensor) -> Tensor:
    norm = model.graph.meta.get("normalization")
    if not norm:
        return frames
    mean = np.asarray(norm["mean"], dtype=np.float32).reshape(3, 1, 1, 1)
    std = np.asarray(norm["std"], dtype=np.float32).reshape(3, 1, 1, 1)
    return Tensor((frames.data - mean) / std)


def predict(model: BoundModel, window: FrameWindow) -> SaliencyMap:
    """Deterministic forward pass encoder -> neck -> decoder."""
    if window.frames.dims != model.input_shape:
        raise DimensionError(
            f"window dims {window.frames.dims} do not match model input "
            f"{model.input_shape}"
        )
    out = model.run_saliency(_normalize(model, window.frames))
    return SaliencyMap(values=out, frame_index=window.target_index)


def ensemble(ms: SaliencyMap, ma: SaliencyMap) -> SaliencyMap:
    """Pixel-wise mean of two maps for the same frame; the first map is
    resized to the second's resolution when they differ."""
    if ms.frame_index != ma.frame_index:
        raise UsageError(
            f"cannot ensemble maps for frames {ms.frame_index} and {ma.frame_index}"
        )
    small = ms.values
    if small.dims != ma.values.dims:
        small = trilinear_upsample(small, size=ma.values.dims[1:])
    return SaliencyMap(values=pixelwise_mean(small, ma.values), frame_index=ma.frame_index)


@dataclass(frozen=True)
class BenchReport:
    """Wall-clock throughput of repeated forward passes."""

    batch: int
    iters: int
    warmup: int
    samples: tuple[float, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return len(self.samples) > 0

    @property
    def fps_mean(self) -> float:
        return float(np.mean(self.samples)) if self.samples else 0.0

    @property
    def fps_std(self) -> float:
        return float(np.std(self.samples)) if self.samples else 0.0

    def as_dict(self) -> dict:
        return {
            "batch": self.batch,
            "iters": self.iters,
            "warmup": self.warmup,
            "fps_mean": self.fps_mean,
            "fps_std": self.fps_std,
            "samples": list(self.samples),
            "valid": self.valid,
        }


def default_threads() -> int:
    env = os.environ.get("SALENGINE_THREADS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def bench(
    model: BoundModel,
    batch: int = 1,
    iters: int = 10,
    warmup: int = 3,
    threads: int | None = None,
    seed: int = 0,
) -> BenchReport:
    """Frames/second over `iters` timed iterations of `batch` forward
    passes each, after `warmup` untimed passes. I/O is excluded: the
    windows are synthesized up front."""
    if batch < 1:
        raise UsageError(f"batch must be >= 1, got {batch}")
    if iters < 0:
        raise UsageError(f"iters must be >= 0, got {iters}")
    _, _, h, w = model.input_shape
    rng = np.random.default_rng(seed)
    windows = [
        FrameWindow(
            frames=Tensor(rng.random((3, WINDOW_LEN, h, w), dtype=np.float32)),
            target_index=i,
            variant=Variant(model.graph.meta.get("variant", "a")),
        )
        for i in range(batch)
    ]
    workers = threads if threads else min(batch, default_threads())

    def run_batch():
        if workers > 1 and batch > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda wdw: predict(model, wdw), windows))
        else:
            for wdw in windows:
                predict(model, wdw)

    for _ in range(warmup):
        predict(model, windows[0])
    samples = []
    for _ in range(iters):
        start = time.perf_counter()
        run_batch()
        elapsed = time.perf_counter() - start
        samples.append(batch / elapsed if elapsed > 0 else float("inf"))
    return BenchReport(batch=batch, iters=iters, warmup=warmup, samples=tuple(samples))
