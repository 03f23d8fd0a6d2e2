"""Reference model builders: the two-pathway action encoder, the
separable-inception encoder, the fusion neck and the grouped-conv
saliency decoder, composed into the ViNet-S / ViNet-A graphs.

All channel arithmetic is parameterized by `width_div` so that /8-scale
"tiny" graphs can be built for fast CPU tests. Where integer scaling
would break a group-divisibility constraint, reduction widths are rounded
up to the consumer's group multiple; at full width the rounding is a
no-op.
"""

from __future__ import annotations

from enum import Enum

from .errors import ConfigError
from .graph import GraphConfig, LayerSpec

DECODER_GROUPS = (32, 16, 8, 8, 4, 2)
DECODER_CHANNELS = (512, 256, 128, 64, 32, 16)

SLOWFAST_DEPTHS = (3, 4, 6, 3)
SLOWFAST_WIDTHS = (64, 128, 256, 512)
SLOWFAST_OUTS = (256, 512, 1024, 2048)
SLOWFAST_ALPHA = 4  # slow path sees T/alpha frames
SLOWFAST_BETA = 8  # fast channels = slow / beta

# Inception block channel table: in, b0, b1a, b1b, b2a, b2b, b3
S3D_MIXED = {
    "3b": (192, 64, 96, 128, 16, 32, 32),
    "3c": (256, 128, 128, 192, 32, 96, 64),
    "4b": (480, 192, 96, 208, 16, 48, 64),
    "4c": (512, 160, 112, 224, 24, 64, 64),
    "4d": (512, 128, 128, 256, 24, 64, 64),
    "4e": (512, 112, 144, 288, 32, 64, 64),
    "4f": (528, 256, 160, 320, 32, 128, 128),
    "5b": (832, 256, 160, 320, 32, 128, 128),
    "5c": (832, 384, 192, 384, 48, 128, 128),
}


class Variant(str, Enum):
    """The two single-model variants; the ensemble is built from both."""

    VINET_S = "s"
    VINET_A = "a"


def _ceil_to(value: int, multiple: int) -> int:
    return ((value + multiple - 1) // multiple) * multiple


class _Builder:
    """Accumulates LayerSpecs in topological order."""

    def __init__(self, name: str, input_shape, meta=None):
        self.name = name
        self.input_shape = tuple(input_shape)
        self.meta = dict(meta or {})
        self.layers: list[LayerSpec] = []

    def add(self, name, kind, inputs, scope="", bn=None, **params) -> str:
        self.layers.append(
            LayerSpec(
                name=name,
                kind=kind,
                inputs=tuple(inputs) if isinstance(inputs, (list, tuple)) else (inputs,),
                params=params,
                scope=scope,
                bn=bn,
            )
        )
        return name

    def conv(
        self,
        name,
        src,
        in_ch,
        out_ch,
        kernel,
        stride=(1, 1, 1),
        padding=(0, 0, 0),
        dilation=(1, 1, 1),
        groups=1,
        act=None,
        scope="",
        bn=False,
    ) -> str:
        out = self.add(
            name,
            "conv3d",
            src,
            scope=scope,
            bn=f"{name}.bn" if bn else None,
            in_ch=in_ch,
            out_ch=out_ch,
            kernel=list(kernel),
            stride=list(stride),
            padding=list(padding),
            dilation=list(dilation),
            groups=groups,
            bias=True,
        )
        if act:
            out = self.add(f"{name}.{act}", act, out, scope=scope)
        return out

    def pointwise(self, name, src, in_ch, out_ch, act=None, scope="", bn=False) -> str:
        out = self.add(
            name,
            "pointwise",
            src,
            scope=scope,
            bn=f"{name}.bn" if bn else None,
            in_ch=in_ch,
            out_ch=out_ch,
            bias=True,
        )
        if act:
            out = self.add(f"{name}.{act}", act, out, scope=scope)
        return out

    def finish(self, taps) -> GraphConfig:
        return GraphConfig(
            name=self.name,
            input_shape=self.input_shape,
            layers=tuple(self.layers),
            taps=taps,
            meta=self.meta,
        )


# --------------------------------------------------------------------------
# Two-pathway (slow/fast) encoder
# --------------------------------------------------------------------------


def _bottleneck_stage(
    b, path, stage, src, in_ch, width, out_ch, blocks, t_kernel, stride, dilation
):
    """One residual stage of bottleneck blocks (stride on the 3x3 conv)."""
    cur, cin = src, in_ch
    for i in range(blocks):
        ss = stride if i == 0 else 1
        p = f"{path}.{stage}.b{i}"
        c1 = b.conv(
            f"{p}.conv1", cur, cin, width, (t_kernel, 1, 1),
            padding=(t_kernel // 2, 0, 0), act="relu", scope="encoder", bn=True,
        )
        c2 = b.conv(
            f"{p}.conv2", c1, width, width, (1, 3, 3),
            stride=(1, ss, ss), padding=(0, dilation, dilation),
            dilation=(1, dilation, dilation), act="relu", scope="encoder", bn=True,
        )
        c3 = b.conv(f"{p}.conv3", c2, width, out_ch, (1, 1, 1), scope="encoder", bn=True)
        if cin != out_ch or ss != 1:
            shortcut = b.conv(
                f"{p}.down", cur, cin, out_ch, (1, 1, 1),
                stride=(1, ss, ss), scope="encoder", bn=True,
            )
        else:
            shortcut = cur
        added = b.add(f"{p}.add", "add", [c3, shortcut], scope="encoder")
        cur = b.add(f"{p}.relu", "relu", added, scope="encoder")
        cin = out_ch
    return cur


def _slowfast_body(b: _Builder, width_div: int) -> dict:
    dv = width_div

    def ch(c):
        return max(1, c // dv)

    slow_stem = ch(64)
    fast_stem = max(1, slow_stem // SLOWFAST_BETA)

    # Slow pathway: temporal subsample then spatial stem.
    sub = b.add(
        "slow.sub", "maxpool", "input", scope="encoder",
        kernel=[1, 1, 1], stride=[SLOWFAST_ALPHA, 1, 1], padding=[0, 0, 0],
    )
    s = b.conv(
        "slow.stem.conv", sub, 3, slow_stem, (1, 7, 7),
        stride=(1, 2, 2), padding=(0, 3, 3), act="relu", scope="encoder", bn=True,
    )
    s = b.add(
        "slow.stem.pool", "maxpool", s, scope="encoder",
        kernel=[1, 3, 3], stride=[1, 2, 2], padding=[0, 1, 1],
    )
    # Fast pathway keeps the full frame rate, long temporal stem kernel.
    f = b.conv(
        "fast.stem.conv", "input", 3, fast_stem, (5, 7, 7),
        stride=(1, 2, 2), padding=(2, 3, 3), act="relu", scope="encoder", bn=True,
    )
    f = b.add(
        "fast.stem.pool", "maxpool", f, scope="encoder",
        kernel=[1, 3, 3], stride=[1, 2, 2], padding=[0, 1, 1],
    )

    def lateral(tag, src, fch):
        lat = b.conv(
            f"lat.{tag}", src, fch, 2 * fch, (5, 1, 1),
            stride=(SLOWFAST_ALPHA, 1, 1), padding=(2, 0, 0),
            act="relu", scope="encoder", bn=True,
        )
        return lat, 2 * fch

    lat, lat_ch = lateral("stem", f, fast_stem)
    fused = b.add("fuse.stem", "concat_skip", [s, lat], scope="encoder")
    taps = {"X1": fused}
    tap_ch = {"X1": slow_stem + lat_ch}

    slow_in = slow_stem + lat_ch
    fast_in = fast_stem
    stage_names = ("res2", "res3", "res4", "res5")
    t_kernels_slow = (1, 1, 3, 3)
    strides = (1, 2, 2, 1)
    dilations = (1, 1, 1, 2)
    for idx, stage in enumerate(stage_names):
        width = ch(SLOWFAST_WIDTHS[idx])
        out_ch = ch(SLOWFAST_OUTS[idx])
        f_width = max(1, width // SLOWFAST_BETA)
        f_out = max(1, out_ch // SLOWFAST_BETA)
        s = _bottleneck_stage(
            b, "slow", stage, fused, slow_in, width, out_ch,
            SLOWFAST_DEPTHS[idx], t_kernels_slow[idx], strides[idx], dilations[idx],
        )
        f = _bottleneck_stage(
            b, "fast", stage, f, fast_in, f_width, f_out,
            SLOWFAST_DEPTHS[idx], 3, strides[idx], dilations[idx],
        )
        if stage != "res5":
            lat, lat_ch = lateral(stage, f, f_out)
            fused = b.add(f"fuse.{stage}", "concat_skip", [s, lat], scope="encoder")
            tap = f"X{idx + 2}"
            taps[tap] = fused
            tap_ch[tap] = out_ch + lat_ch
            slow_in = out_ch + lat_ch
        else:
            taps["X_slow"] = s
            taps["X_fast"] = f
            tap_ch["X_slow"] = out_ch
            tap_ch["X_fast"] = f_out
        fast_in = f_out
    return {"taps": taps, "channels": tap_ch}


def build_slowfast_encoder(input_hw=(256, 464), width_div=1, name="slowfast_r50") -> GraphConfig:
    """Two-pathway encoder graph with taps X1..X4, X_slow, X_fast."""
    h, w = input_hw
    if h % 16 or w % 16:
        raise ConfigError(f"input H,W must be multiples of 16, got {input_hw}")
    b = _Builder(name, (3, 32, h, w))
    body = _slowfast_body(b, width_div)
    return b.finish(body["taps"])


# --------------------------------------------------------------------------
# Separable-inception encoder
# --------------------------------------------------------------------------


def _sep_conv(b, name, src, in_ch, out_ch, k, stride=1, scope="encoder"):
    """Spatial (1,k,k) conv followed by temporal (k,1,1) conv, each with relu."""
    pad = k // 2
    cur = b.conv(
        f"{name}.conv_s", src, in_ch, out_ch, (1, k, k),
        stride=(1, stride, stride), padding=(0, pad, pad),
        act="relu", scope=scope, bn=True,
    )
    return b.conv(
        f"{name}.conv_t", cur, out_ch, out_ch, (k, 1, 1),
        stride=(stride, 1, 1), padding=(pad, 0, 0),
        act="relu", scope=scope, bn=True,
    )


def _mixed_block(b, name, src, in_ch, widths) -> tuple[str, int]:
    c0, c1a, c1b, c2a, c2b, c3 = widths
    br0 = b.pointwise(f"{name}.b0", src, in_ch, c0, act="relu", scope="encoder", bn=True)
    t = b.pointwise(f"{name}.b1.0", src, in_ch, c1a, act="relu", scope="encoder", bn=True)
    br1 = _sep_conv(b, f"{name}.b1.1", t, c1a, c1b, 3)
    t = b.pointwise(f"{name}.b2.0", src, in_ch, c2a, act="relu", scope="encoder", bn=True)
    br2 = _sep_conv(b, f"{name}.b2.1", t, c2a, c2b, 3)
    t = b.add(
        f"{name}.b3.pool", "maxpool", src, scope="encoder",
        kernel=[3, 3, 3], stride=[1, 1, 1], padding=[1, 1, 1],
    )
    br3 = b.pointwise(f"{name}.b3.1", t, in_ch, c3, act="relu", scope="encoder", bn=True)
    cat = b.add(f"{name}.cat", "concat_skip", [br0, br1, br2, br3], scope="encoder")
    return cat, c0 + c1b + c2b + c3


def _s3d_body(b: _Builder, width_div: int, tap_align=None) -> dict:
    """tap_align maps a mixed-block tag to a multiple its output channel
    count must hit (the consuming decoder group); the pool branch is
    widened to absorb the remainder."""
    dv = width_div
    align = tap_align or {}

    def ch(c):
        return max(1, c // dv)

    cur = _sep_conv(b, "stem.sep1", "input", 3, ch(64), 7, stride=2)
    cur = b.add(
        "stem.pool1", "maxpool", cur, scope="encoder",
        kernel=[1, 3, 3], stride=[1, 2, 2], padding=[0, 1, 1],
    )
    cur = b.pointwise("stem.conv2", cur, ch(64), ch(64), act="relu", scope="encoder", bn=True)
    cur = _sep_conv(b, "stem.sep2", cur, ch(64), ch(192), 3)
    taps = {"X1": cur}
    tap_ch = {"X1": ch(192)}

    cur = b.add(
        "pool2", "maxpool", cur, scope="encoder",
        kernel=[1, 3, 3], stride=[1, 2, 2], padding=[0, 1, 1],
    )
    in_ch = ch(192)
    pools_before = {"4b": ("pool3", [3, 3, 3], [2, 2, 2], [1, 1, 1]),
                    "5b": ("pool4", [2, 2, 2], [2, 2, 2], [0, 0, 0])}
    for tag in ("3b", "3c", "4b", "4c", "4d", "4e", "4f", "5b", "5c"):
        if tag in pools_before:
            pname, k, s, p = pools_before[tag]
            cur = b.add(pname, "maxpool", cur, scope="encoder", kernel=k, stride=s, padding=p)
        widths = [ch(c) for c in S3D_MIXED[tag][1:]]
        if tag in align:
            total = widths[0] + widths[2] + widths[4] + widths[5]
            widths[5] += (-total) % align[tag]
        cur, in_ch = _mixed_block(b, f"mixed{tag}", cur, in_ch, widths)
        if tag == "3c":
            taps["X2"], tap_ch["X2"] = cur, in_ch
        elif tag == "4f":
            taps["X3"], tap_ch["X3"] = cur, in_ch
        elif tag == "5c":
            taps["X4"], tap_ch["X4"] = cur, in_ch
    return {"taps": taps, "channels": tap_ch}


def build_s3d_encoder(input_hw=(224, 384), width_div=1, name="s3d") -> GraphConfig:
    """Separable-inception encoder with hierarchical taps X1..X4."""
    h, w = input_hw
    if h % 32 or w % 32:
        raise ConfigError(f"input H,W must be multiples of 32, got {input_hw}")
    b = _Builder(name, (3, 32, h, w))
    body = _s3d_body(b, width_div)
    return b.finish(body["taps"])


# --------------------------------------------------------------------------
# Fusion neck and saliency decoder
# --------------------------------------------------------------------------


def build_neck(b: _Builder, enc: dict, t_out: int) -> dict:
    """Fuse the two pathway outputs and halve every skip's channels."""
    taps, chans = enc["taps"], enc["channels"]
    slow_ch = chans["X_slow"]
    fast_ch = chans["X_fast"]
    reduced = b.pointwise(
        "neck.slow", taps["X_slow"], slow_ch, slow_ch // 2,
        act="relu", scope="neck", bn=True,
    )
    f = b.add("neck.fast_reshape", "reshape_fast", taps["X_fast"], scope="neck", factor=2)
    f = b.add("neck.fast_pool", "adaptive_pool_t", f, scope="neck", t_out=t_out)
    fused = b.add("neck.fuse", "concat_skip", [reduced, f], scope="neck")
    fused_ch = slow_ch // 2 + fast_ch * 2

    # Consumer group counts for skips entering decoder blocks 5,4,3,2.
    consumer = {"X1": DECODER_GROUPS[4], "X2": DECODER_GROUPS[3],
                "X3": DECODER_GROUPS[2], "X4": DECODER_GROUPS[1]}
    skips = {}
    for tap in ("X1", "X2", "X3", "X4"):
        out_ch = _ceil_to(max(1, chans[tap] // 2), consumer[tap])
        skips[tap] = (
            b.pointwise(
                f"neck.skip{tap[1]}", taps[tap], chans[tap], out_ch,
                act="relu", scope="neck", bn=True,
            ),
            out_ch,
        )
    return {"fused": fused, "fused_ch": fused_ch, "skips": skips}


def build_decoder(
    b: _Builder,
    src: str,
    input_ch: int,
    skips: dict,
    t_strides,
    width_div: int,
    upsample_before: bool,
) -> str:
    """Six grouped-conv blocks, shuffles after the first three, four x2
    spatial upsamplings, then an ungrouped pointwise head with sigmoid.

    skips: block index (1-based) -> (layer name, channels), concatenated
    in front of the block conv.
    """
    channels = [max(1, c // width_div) for c in DECODER_CHANNELS]
    cur, cin = src, input_ch
    for i in range(6):
        blk = i + 1
        prefix = f"dec.b{blk}"
        if upsample_before and 2 <= blk <= 5:
            cur = b.add(f"{prefix}.up", "upsample", cur, scope="decoder", scale=[1, 2, 2])
        if blk in skips:
            skip_name, skip_ch = skips[blk]
            cur = b.add(f"{prefix}.cat", "concat_skip", [cur, skip_name], scope="decoder")
            cin += skip_ch
        g = DECODER_GROUPS[i]
        if cin % g or channels[i] % g:
            raise ConfigError(
                f"decoder block {blk}: groups={g} does not divide {cin}->{channels[i]}"
            )
        cur = b.conv(
            f"{prefix}.conv", cur, cin, channels[i], (3, 3, 3),
            stride=(t_strides[i], 1, 1), padding=(1, 1, 1),
            groups=g, scope="decoder",
        )
        if i < 3:
            cur = b.add(f"{prefix}.shuffle", "shuffle", cur, scope="decoder", groups=g)
        cur = b.add(f"{prefix}.relu", "relu", cur, scope="decoder")
        if not upsample_before and 2 <= blk <= 5:
            cur = b.add(f"{prefix}.up", "upsample", cur, scope="decoder", scale=[1, 2, 2])
        cin = channels[i]
    cur = b.pointwise("dec.out.conv", cur, cin, 1, scope="decoder")
    return b.add("dec.out.sigmoid", "sigmoid", cur, scope="decoder")


def build_vinet_a(input_hw=(256, 464), width_div=1, name=None) -> GraphConfig:
    """Full two-pathway saliency model: encoder, fusion neck, decoder."""
    h, w = input_hw
    if h % 16 or w % 16:
        raise ConfigError(f"input H,W must be multiples of 16, got {input_hw}")
    b = _Builder(
        name or ("vinet_a" if width_div == 1 else f"vinet_a_div{width_div}"),
        (3, 32, h, w),
        meta={
            "variant": "a",
            "normalization": {"mean": [0.45, 0.45, 0.45], "std": [0.225, 0.225, 0.225]},
        },
    )
    enc = _slowfast_body(b, width_div)
    neck = build_neck(b, enc, t_out=32 // SLOWFAST_ALPHA)
    sk = neck["skips"]
    saliency = build_decoder(
        b,
        neck["fused"],
        neck["fused_ch"],
        skips={2: sk["X4"], 3: sk["X3"], 4: sk["X2"], 5: sk["X1"]},
        t_strides=(2, 2, 2, 1, 1, 1),
        width_div=width_div,
        upsample_before=False,
    )
    taps = dict(enc["taps"])
    taps["X_slowfast"] = neck["fused"]
    taps["saliency"] = saliency
    return b.finish(taps)


def build_vinet_s(input_hw=(224, 384), width_div=1, name=None) -> GraphConfig:
    """Separable-inception encoder feeding the same lightweight decoder;
    taps X1..X3 enter as skips, the deepest tap is the decoder input.

    The prediction comes out at half the input resolution (the encoder is
    one stride level deeper than the two-pathway variant while the decoder
    keeps its four upsamplings); the ensemble stage upsamples it."""
    h, w = input_hw
    if h % 32 or w % 32:
        raise ConfigError(f"input H,W must be multiples of 32, got {input_hw}")
    b = _Builder(
        name or ("vinet_s" if width_div == 1 else f"vinet_s_div{width_div}"),
        (3, 32, h, w),
        meta={
            "variant": "s",
            "normalization": {"mean": [0.5, 0.5, 0.5], "std": [0.5, 0.5, 0.5]},
        },
    )
    enc = _s3d_body(
        b,
        width_div,
        tap_align={"3c": DECODER_GROUPS[2], "4f": DECODER_GROUPS[1]},
    )
    taps, chans = enc["taps"], enc["channels"]
    if chans["X1"] % DECODER_GROUPS[3]:
        raise ConfigError("X1 channels incompatible with decoder block 4 groups")
    saliency = build_decoder(
        b,
        taps["X4"],
        chans["X4"],
        skips={
            2: (taps["X3"], chans["X3"]),
            3: (taps["X2"], chans["X2"]),
            4: (taps["X1"], chans["X1"]),
        },
        t_strides=(2, 2, 1, 1, 1, 1),
        width_div=width_div,
        upsample_before=True,
    )
    all_taps = dict(taps)
    all_taps["saliency"] = saliency
    return b.finish(all_taps)


def build_variant(variant: Variant, input_hw=None, width_div=1) -> GraphConfig:
    if variant == Variant.VINET_A:
        return build_vinet_a(input_hw or (256, 464), width_div)
    return build_vinet_s(input_hw or (224, 384), width_div)
