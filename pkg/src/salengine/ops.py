"""Neural layer primitives: grouped 3D convolution, channel shuffle,
trilinear upsampling, pooling and activations.

All functions are pure: they take immutable Tensors and return new ones.
Convolution follows the cross-correlation convention (no kernel flip).
Reductions run in a fixed order (kernel taps iterated t-major, then h,
then w; groups batched per tap), so repeated calls on the same inputs are
bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Tensor

Triple = tuple[int, int, int]


@dataclass(frozen=True)
class Conv3dParams:
    """Static description of a (possibly grouped) 3D convolution."""

    in_ch: int
    out_ch: int
    kernel: Triple
    stride: Triple = (1, 1, 1)
    padding: Triple = (0, 0, 0)
    dilation: Triple = (1, 1, 1)
    groups: int = 1
    has_bias: bool = True

    def __post_init__(self):
        if self.in_ch < 1 or self.out_ch < 1 or self.groups < 1:
            raise ConfigError("channel and group counts must be positive")
        if self.in_ch % self.groups or self.out_ch % self.groups:
            raise ConfigError(
                f"groups={self.groups} must divide in_ch={self.in_ch} "
                f"and out_ch={self.out_ch}"
            )
        for tup in (self.kernel, self.stride, self.dilation):
            if any(v < 1 for v in tup):
                raise ConfigError(f"kernel/stride/dilation must be >= 1, got {tup}")
        if any(v < 0 for v in self.padding):
            raise ConfigError(f"padding must be >= 0, got {self.padding}")

    @property
    def weight_dims(self) -> tuple[int, ...]:
        return (self.out_ch, self.in_ch // self.groups, *self.kernel)

    def param_count(self) -> int:
        n = self.out_ch * (self.in_ch // self.groups)
        n *= self.kernel[0] * self.kernel[1] * self.kernel[2]
        return n + (self.out_ch if self.has_bias else 0)

    def out_extent(self, axis: int, n: int) -> int:
        k, s = self.kernel[axis], self.stride[axis]
        p, d = self.padding[axis], self.dilation[axis]
        return (n + 2 * p - d * (k - 1) - 1) // s + 1


def conv3d(x: Tensor, w: Tensor, b: Tensor | None, p: Conv3dParams) -> Tensor:
    """Grouped 3D cross-correlation over a [C,T,H,W] tensor."""
    if len(x.dims) != 4:
        raise DimensionError(f"conv3d expects [C,T,H,W], got {x.dims}")
    if x.dims[0] != p.in_ch:
        raise DimensionError(
            f"input has {x.dims[0]} channels, conv expects {p.in_ch}"
        )
    if w.dims != p.weight_dims:
        raise DimensionError(
            f"weight dims {w.dims} do not match expected {p.weight_dims}"
        )
    if p.has_bias:
        if b is None or b.dims != (p.out_ch,):
            raise DimensionError(f"bias must have dims ({p.out_ch},)")
    elif b is not None:
        raise DimensionError("bias supplied for a bias-free convolution")

    _, t_in, h_in, w_in = x.dims
    out_t = p.out_extent(0, t_in)
    out_h = p.out_extent(1, h_in)
    out_w = p.out_extent(2, w_in)
    if min(out_t, out_h, out_w) < 1:
        raise DimensionError(
            f"conv output would be empty for input {x.dims} with {p}"
        )

    pt, ph, pw = p.padding
    xp = np.pad(x.data, ((0, 0), (pt, pt), (ph, ph), (pw, pw)))
    g = p.groups
    icg = p.in_ch // g
    ocg = p.out_ch // g
    xg = xp.reshape(g, icg, *xp.shape[1:])
    wg = w.data.reshape(g, ocg, icg, *p.kernel)

    st, sh, sw = p.stride
    dt, dh, dw = p.dilation
    acc = np.zeros((g, ocg, out_t, out_h, out_w), dtype=np.float32)
    for kt in range(p.kernel[0]):
        t0 = kt * dt
        for kh in range(p.kernel[1]):
            h0 = kh * dh
            for kw in range(p.kernel[2]):
                w0 = kw * dw
                window = xg[
                    :,
                    :,
                    t0 : t0 + (out_t - 1) * st + 1 : st,
                    h0 : h0 + (out_h - 1) * sh + 1 : sh,
                    w0 : w0 + (out_w - 1) * sw + 1 : sw,
                ]
                acc += np.einsum(
                    "goc,gcthw->gothw", wg[:, :, :, kt, kh, kw], window
                )
    out = acc.reshape(p.out_ch, out_t, out_h, out_w)
    if p.has_bias:
        out = out + b.data[:, None, None, None]
    return Tensor(out)


def channel_shuffle(x: Tensor, groups: int) -> Tensor:
    """Permute channels by the reshape-(g, C/g)-transpose rule."""
    c = x.dims[0]
    if groups < 1 or c % groups:
        raise ConfigError(f"groups={groups} must divide channel count {c}")
    if groups == 1:
        return x
    per = c // groups
    data = x.data.reshape(groups, per, *x.dims[1:])
    data = np.swapaxes(data, 0, 1).reshape(x.dims)
    return Tensor(np.ascontiguousarray(data))


def shuffle_index_map(c: int, groups: int) -> list[int]:
    """Source channel index for each output channel of channel_shuffle."""
    if groups < 1 or c % groups:
        raise ConfigError(f"groups={groups} must divide channel count {c}")
    return [k * (c // groups) + j for j in range(c // groups) for k in range(groups)]


def _linear_axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Sample centers at (i + 0.5) * n_in / n_out - 0.5, clamped (align_corners=false).
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    coords = np.clip(coords, 0.0, n_in - 1)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = (coords - lo).astype(np.float32)
    return lo, hi, frac


def _interp_axis(data: np.ndarray, axis: int, n_out: int) -> np.ndarray:
    n_in = data.shape[axis]
    if n_out == n_in:
        return data
    lo, hi, frac = _linear_axis_weights(n_in, n_out)
    lo_v = np.take(data, lo, axis=axis)
    hi_v = np.take(data, hi, axis=axis)
    shape = [1] * data.ndim
    shape[axis] = n_out
    f = frac.reshape(shape)
    # lo + f*(hi - lo): keeps constants (and lo==hi samples) bit-exact.
    return lo_v + f * (hi_v - lo_v)


def trilinear_upsample(
    x: Tensor,
    scale: Triple | None = None,
    size: Triple | None = None,
) -> Tensor:
    """Trilinear interpolation of the T/H/W axes of a [C,T,H,W] tensor.

    Exactly one of `scale` or `size` must be given; `size` may shrink an
    axis as well as grow it.
    """
    if len(x.dims) != 4:
        raise DimensionError(f"trilinear_upsample expects [C,T,H,W], got {x.dims}")
    if (scale is None) == (size is None):
        raise ConfigError("pass exactly one of scale= or size=")
    if scale is not None:
        if any(s < 1 for s in scale):
            raise ConfigError(f"scale factors must be >= 1, got {scale}")
        size = tuple(n * s for n, s in zip(x.dims[1:], scale))
    if any(s < 1 for s in size):
        raise ConfigError(f"target size must be positive, got {size}")
    out = x.data
    for axis, n_out in zip((1, 2, 3), size):
        out = _interp_axis(out, axis, n_out)
    return Tensor(out.astype(np.float32))


def adaptive_max_pool_t(x: Tensor, t_out: int) -> Tensor:
    """Max-pool the temporal axis into t_out floor-partitioned bins."""
    if len(x.dims) != 4:
        raise DimensionError(f"adaptive_max_pool_t expects [C,T,H,W], got {x.dims}")
    t_in = x.dims[1]
    if t_out < 1 or t_out > t_in:
        raise ConfigError(f"t_out={t_out} must be in [1, {t_in}]")
    if t_out == t_in:
        return x
    starts = [(i * t_in) // t_out for i in range(t_out)]
    ends = [((i + 1) * t_in) // t_out for i in range(t_out)]
    slabs = [
        x.data[:, s:e].max(axis=1, keepdims=True) for s, e in zip(starts, ends)
    ]
    return Tensor(np.concatenate(slabs, axis=1))


def max_pool3d(
    x: Tensor,
    kernel: Triple,
    stride: Triple | None = None,
    padding: Triple = (0, 0, 0),
) -> Tensor:
    """Windowed max over T/H/W with zero-effect (-inf) padding."""
    if len(x.dims) != 4:
        raise DimensionError(f"max_pool3d expects [C,T,H,W], got {x.dims}")
    stride = stride or kernel
    if any(k < 1 for k in kernel) or any(s < 1 for s in stride):
        raise ConfigError("kernel and stride must be >= 1")
    if any(p < 0 for p in padding):
        raise ConfigError("padding must be >= 0")
    if any(p >= k for p, k in zip(padding, kernel)):
        raise ConfigError("padding must be smaller than the pool kernel")
    dims_in = x.dims[1:]
    out_dims = [
        (n + 2 * p - k) // s + 1
        for n, k, s, p in zip(dims_in, kernel, stride, padding)
    ]
    if min(out_dims) < 1:
        raise ConfigError(
            f"pool window {kernel} larger than padded input {x.dims}"
        )
    pt, ph, pw = padding
    xp = np.pad(
        x.data,
        ((0, 0), (pt, pt), (ph, ph), (pw, pw)),
        constant_values=-np.inf,
    )
    out_t, out_h, out_w = out_dims
    st, sh, sw = stride
    result = np.full((x.dims[0], out_t, out_h, out_w), -np.inf, dtype=np.float32)
    for kt in range(kernel[0]):
        for kh in range(kernel[1]):
            for kw in range(kernel[2]):
                window = xp[
                    :,
                    kt : kt + (out_t - 1) * st + 1 : st,
                    kh : kh + (out_h - 1) * sh + 1 : sh,
                    kw : kw + (out_w - 1) * sw + 1 : sw,
                ]
                np.maximum(result, window, out=result)
    return Tensor(result)


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, np.float32(0.0)))


_SIG_LO = np.nextafter(np.float32(0.0), np.float32(1.0))
_SIG_HI = np.nextafter(np.float32(1.0), np.float32(0.0))


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign to stay overflow-free for large |x|; clamp to the
    # nearest representables inside (0,1) so the open-range invariant
    # survives float32 saturation.
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)
    return Tensor(np.clip(out, _SIG_LO, _SIG_HI))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum (residual connections)."""
    if a.dims != b.dims:
        raise DimensionError(f"add dims differ: {a.dims} vs {b.dims}")
    return Tensor(a.data + b.data)
