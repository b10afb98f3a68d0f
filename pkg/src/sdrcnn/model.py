"""The pansharpening network.

Single branch, single scale: a stem block integrates the PAN + upsampled
LRMS stack into `width` feature maps; three residual blocks follow, each an
inverted bottleneck with the depthwise layer on top; an addition layer
after each block keeps the running elementwise sum of the stem output and
every block output so far; the three running sums are concatenated and
fused by a 1x1 convolution into a B-band residual image, which is added to
the bicubically upsampled LRMS (spectral mapping).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeMismatchError
from .tensor import (
    BnStats,
    ConvWeights,
    Tensor4,
    add,
    batch_norm,
    concat_channels,
    conv_depthwise,
    conv_pointwise,
    relu,
    upsample_bicubic,
)


@dataclass(frozen=True)
class SdrcnnConfig:
    bands: int = 8
    width: int = 52
    expansion: int = 5
    n_residual_blocks: int = 3
    kernel: int = 3
    upsample_factor: int = 4

    def validate(self) -> "SdrcnnConfig":
        if self.bands < 1:
            raise ConfigError(f"bands must be >= 1, got {self.bands}")
        if self.width < 1:
            raise ConfigError(f"width must be > 0, got {self.width}")
        if self.expansion < 1:
            raise ConfigError(f"expansion must be >= 1, got {self.expansion}")
        if self.n_residual_blocks < 1:
            raise ConfigError(f"n_residual_blocks must be >= 1, got {self.n_residual_blocks}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be odd and positive, got {self.kernel}")
        if self.upsample_factor < 1:
            raise ConfigError(f"upsample_factor must be >= 1, got {self.upsample_factor}")
        return self


@dataclass
class BnLayer:
    gamma: Tensor4
    beta: Tensor4
    stats: BnStats

    @staticmethod
    def fresh(channels: int) -> "BnLayer":
        return BnLayer(
            Tensor4(np.ones((1, channels, 1, 1)), requires_grad=True),
            Tensor4(np.zeros((1, channels, 1, 1)), requires_grad=True),
            BnStats.fresh(channels),
        )


@dataclass
class BlockParams:
    """One stem or residual block: depthwise k x k -> expand 1x1 -> project 1x1."""
    dw: ConvWeights
    expand: ConvWeights
    project: ConvWeights
    bn: list = field(default_factory=list)  # [BnLayer x3] when batch norm is on


@dataclass
class SdrcnnParams:
    config: SdrcnnConfig
    stem: BlockParams
    residual: list
    fusion: ConvWeights
    use_bn: bool = False

    def named(self) -> dict:
        """Learnable tensors keyed by hierarchical name, in a fixed order."""
        out = {}

        def put_conv(prefix, cw):
            out[f"{prefix}.weight"] = cw.weight
            out[f"{prefix}.bias"] = cw.bias

        def put_block(prefix, bp):
            put_conv(f"{prefix}.dw", bp.dw)
            put_conv(f"{prefix}.expand", bp.expand)
            put_conv(f"{prefix}.project", bp.project)
            for i, layer in enumerate(bp.bn):
                out[f"{prefix}.bn{i}.gamma"] = layer.gamma
                out[f"{prefix}.bn{i}.beta"] = layer.beta

        put_block("stem", self.stem)
        for i, bp in enumerate(self.residual):
            put_block(f"res{i}", bp)
        put_conv("fusion", self.fusion)
        return out

    def buffers(self) -> dict:
        """Non-learnable running statistics, keyed like named()."""
        out = {}
        blocks = [("stem", self.stem)] + [(f"res{i}", bp) for i, bp in enumerate(self.residual)]
        for prefix, bp in blocks:
            for i, layer in enumerate(bp.bn):
                out[f"{prefix}.bn{i}.mean"] = layer.stats.mean
                out[f"{prefix}.bn{i}.var"] = layer.stats.var
        return out

    def count(self) -> int:
        return sum(t.data.size for t in self.named().values())

    def zero_grads(self) -> None:
        for t in self.named().values():
            t.grad = None


@dataclass
class ForwardTrace:
    i_s: Tensor4
    f_s: Tensor4
    i_r: list
    f_r: list
    additions: list
    concat: Tensor4
    residual_image: Tensor4
    hrms: Tensor4


def param_count(config: SdrcnnConfig, bn: bool = False) -> int:
    """Closed-form learnable parameter count; must equal enumeration."""
    config.validate()
    B, w, e, n, k = (config.bands, config.width, config.expansion,
                     config.n_residual_blocks, config.kernel)
    k2 = k * k

    def block(cin):
        total = cin * k2 + cin           # depthwise
        total += e * w * cin + e * w     # expand
        total += w * e * w + w           # project
        if bn:
            total += 2 * (cin + e * w + w)
        return total

    total = block(B + 1)                 # stem
    total += n * block(w)                # residual blocks
    total += B * (n * w) + B             # fusion
    return total


def budget_width(target_params: int, bands: int, expansion: int,
                 n_residual_blocks: int = 3, kernel: int = 3, bn: bool = False) -> int:
    """Largest width whose parameter count stays within the target."""
    def count(w):
        return param_count(SdrcnnConfig(bands, w, expansion, n_residual_blocks, kernel), bn=bn)

    if count(1) > target_params:
        raise ConfigError(
            f"parameter target {target_params} is below the width-1 model size {count(1)}"
        )
    w = 1
    while count(w + 1) <= target_params:
        w += 1
    return w


def init_params(config: SdrcnnConfig, rng: np.random.Generator, bn: bool = False) -> SdrcnnParams:
    """Kaiming fan-in initialization; zero biases; zero fusion layer.

    The zero fusion layer makes the untrained network the exact identity on
    the upsampled LRMS, which is the spectral-mapping starting point.
    """
    config.validate()
    B, w, e, k = config.bands, config.width, config.expansion, config.kernel

    def make_block(cin):
        bp = BlockParams(
            dw=ConvWeights.depthwise(cin, k, rng=rng),
            expand=ConvWeights.pointwise(e * w, cin, rng=rng),
            project=ConvWeights.pointwise(w, e * w, rng=rng),
        )
        if bn:
            bp.bn = [BnLayer.fresh(cin), BnLayer.fresh(e * w), BnLayer.fresh(w)]
        return bp

    stem = make_block(B + 1)
    residual = [make_block(w) for _ in range(config.n_residual_blocks)]
    fusion = ConvWeights.pointwise(B, config.n_residual_blocks * w, rng=None)
    return SdrcnnParams(config, stem, residual, fusion, use_bn=bn)


def build_input(pan: Tensor4, lrms: Tensor4, factor: int = 4) -> Tensor4:
    """Stack PAN over the bicubically upsampled LRMS (PAN channel first)."""
    if pan.c != 1:
        raise ShapeMismatchError(f"pan must have one channel, got shape {pan.shape}")
    if pan.h != factor * lrms.h or pan.w != factor * lrms.w or pan.n != lrms.n:
        raise ShapeMismatchError(
            f"pan {pan.shape} is not exactly {factor}x the lrms spatial size {lrms.shape}"
        )
    return concat_channels([pan, upsample_bicubic(lrms, factor)])


def _block_forward(x: Tensor4, bp: BlockParams, skip: bool,
                   extra_relu: bool = False, training: bool = False) -> Tensor4:
    def bn(t, i):
        if bp.bn:
            layer = bp.bn[i]
            return batch_norm(t, layer.gamma, layer.beta, layer.stats, training)
        return t

    y = bn(conv_depthwise(x, bp.dw), 0)
    if extra_relu:
        y = relu(y)
    y = relu(bn(conv_pointwise(y, bp.expand), 1))
    y = bn(conv_pointwise(y, bp.project), 2)
    return add(x, y) if skip else y


def stem_forward(i_s: Tensor4, params: SdrcnnParams,
                 extra_relu: bool = False, training: bool = False) -> Tensor4:
    cfg = params.config
    if i_s.c != cfg.bands + 1:
        raise ShapeMismatchError(
            f"stem expects {cfg.bands + 1} channels, got tensor shape {i_s.shape}"
        )
    return _block_forward(i_s, params.stem, skip=False,
                          extra_relu=extra_relu, training=training)


def residual_forward(i_r: Tensor4, bp: BlockParams, width: int,
                     extra_relu: bool = False, training: bool = False) -> Tensor4:
    if i_r.c != width:
        raise ShapeMismatchError(
            f"residual block expects {width} channels, got tensor shape {i_r.shape}"
        )
    return _block_forward(i_r, bp, skip=True, extra_relu=extra_relu, training=training)


def dense_forward(pan: Tensor4, lrms: Tensor4, params: SdrcnnParams,
                  spectral_mapping: bool = True, extra_relu: bool = False,
                  training: bool = False) -> ForwardTrace:
    cfg = params.config
    i_s = build_input(pan, lrms, cfg.upsample_factor)
    f_s = stem_forward(i_s, params, extra_relu=extra_relu, training=training)

    i_r, f_r, additions = [], [], []
    inp = f_s
    for bp in params.residual:
        i_r.append(inp)
        out = residual_forward(inp, bp, cfg.width, extra_relu=extra_relu, training=training)
        f_r.append(out)
        inp = add(inp, out)  # the addition layer: running sum of stem + blocks
        additions.append(inp)

    cat = concat_channels(additions)
    if extra_relu:
        cat = relu(cat)
    residual_image = conv_pointwise(cat, params.fusion)
    if spectral_mapping:
        hrms = add(residual_image, upsample_bicubic(lrms, cfg.upsample_factor))
    else:
        hrms = residual_image
    return ForwardTrace(i_s, f_s, i_r, f_r, additions, cat, residual_image, hrms)


def sharpen(pan: np.ndarray, lrms: np.ndarray, params: SdrcnnParams,
            spectral_mapping: bool = True, extra_relu: bool = False) -> np.ndarray:
    """Convenience wrapper: rasters in, fused raster out (inference mode)."""
    pan_t = Tensor4(np.asarray(pan, dtype=np.float64)[None])
    lrms_t = Tensor4(np.asarray(lrms, dtype=np.float64)[None])
    trace = dense_forward(pan_t, lrms_t, params,
                          spectral_mapping=spectral_mapping,
                          extra_relu=extra_relu, training=False)
    return trace.hrms.data[0]
