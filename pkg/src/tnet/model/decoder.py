"""Terrace decoder, the UNet-style baseline decoder, and the segmentation head."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..nnops.activation import ActivationKind
from ..nnops.conv import ConvSpec, ConvTransposeSpec
from ..tensor import Rng
from .layers import (
    Activation, BatchNorm2d, Conv2d, ConvTranspose2d, Module, Sequential, Upsample, conv_bn, emit, log_activation,
)

UPSAMPLE = "upsample"


class TerraceStage(Module):
    """One terrace step: ``act(BN(up(deep)) + BN(lateral(skip)))``.

    ``up`` is a stride-2 transposed conv, or bilinear x2 + 1x1 projection when
    ``transpose_kernel == "upsample"``. ``lateral_kernel=None`` drops the
    lateral conv (identity; a 1x1 projection only if channels disagree).
    """

    def __init__(self, deep_ch, skip_ch, out_ch, transpose_kernel, lateral_kernel, activation, rng: Rng | None):
        super().__init__()
        if transpose_kernel == UPSAMPLE:
            self.up = self.add("project", Sequential(
                ("upsample", Upsample(2)),
                ("conv", Conv2d(ConvSpec(deep_ch, out_ch, 1), rng)),
            ))
            self.up_op = "Upsample"
        else:
            self.up = self.add("transpose", ConvTranspose2d(ConvTransposeSpec(deep_ch, out_ch, int(transpose_kernel)), rng))
            self.up_op = "ConvT"
        self.bn_transpose = self.add("bn_transpose", BatchNorm2d(out_ch))
        if lateral_kernel is None:
            if skip_ch == out_ch:
                self.lateral, self.lateral_path = None, "identity"
            else:
                self.lateral = self.add("lateral", Conv2d(ConvSpec(skip_ch, out_ch, 1), rng))
                self.lateral_path = "projection"
        else:
            self.lateral = self.add("lateral", Conv2d(ConvSpec.same(skip_ch, out_ch, int(lateral_kernel)), rng))
            self.lateral_path = "conv"
        self.bn_lateral = self.add("bn_lateral", BatchNorm2d(out_ch))
        self.act = self.add("act", Activation(activation))
        self.last_shapes: dict = {}

    def forward(self, deep, skip):
        t = self.bn_transpose(self.up(deep))
        emit(self.name, self.up_op)
        emit(self.name, "BN")
        c = skip if self.lateral is None else self.lateral(skip)
        emit(self.name, "LateralConv" if self.lateral is not None else "LateralIdentity")
        c = self.bn_lateral(c)
        emit(self.name, "BN")
        if t.shape != c.shape:
            raise ConfigError(f"{self.name}: upsampled branch {t.shape} cannot be added to lateral branch {c.shape}")
        s = t + c
        log_activation(s)
        emit(self.name, "Add")
        f = self.act(s)
        emit(self.name, "Activation")
        self.last_shapes = {"T": t.shape, "C": c.shape, "F": f.shape}
        return f

    def backward(self, grad):
        g = self.act.backward(grad)
        g_deep = self.up.backward(self.bn_transpose.backward(g))
        g_skip = self.bn_lateral.backward(g)
        if self.lateral is not None:
            g_skip = self.lateral.backward(g_skip)
        return g_deep, g_skip


class TerraceDecoder(Module):
    """Fuses encoder features deepest-first; ``features`` are ordered shallow to deep."""

    def __init__(self, channels, transpose_kernel=3, lateral_kernel=3, activation="relu6", rng: Rng | None = None):
        super().__init__()
        self.stages = []
        chans = list(channels)
        for i in range(len(chans) - 1):
            deep = chans[-1 - i]
            skip = chans[-2 - i]
            stage = TerraceStage(deep, skip, skip, transpose_kernel, lateral_kernel, activation, rng)
            self.stages.append(self.add(f"stage{i + 1}", stage))
        self.out_channels = chans[0]

    def forward(self, features):
        x = features[-1]
        for i, stage in enumerate(self.stages):
            x = stage(x, features[-2 - i])
        return x

    def backward(self, grad):
        grads = [None] * (len(self.stages) + 1)
        for i in reversed(range(len(self.stages))):
            grad, grads[-2 - i] = self.stages[i].backward(grad)
        grads[-1] = grad
        return grads


class UNetStage(Module):
    """Bilinear x2, channel concat with the skip, then two Conv3x3-BN-ReLU."""

    def __init__(self, deep_ch, skip_ch, out_ch, rng: Rng | None):
        super().__init__()
        self.up = self.add("upsample", Upsample(2))
        self.block1 = self.add("block1", conv_bn(deep_ch + skip_ch, out_ch, 3, rng, act="relu"))
        self.block2 = self.add("block2", conv_bn(out_ch, out_ch, 3, rng, act="relu"))
        self.deep_ch = deep_ch
        self.last_shapes: dict = {}

    def forward(self, deep, skip):
        u = self.up(deep)
        cat = np.concatenate([u, skip], axis=1)
        log_activation(cat)
        out = self.block2(self.block1(cat))
        self.last_shapes = {"up": u.shape, "concat": cat.shape, "F": out.shape}
        return out

    def backward(self, grad):
        g = self.block1.backward(self.block2.backward(grad))
        return self.up.backward(g[:, : self.deep_ch]), g[:, self.deep_ch:]


class UNetDecoder(TerraceDecoder):
    def __init__(self, channels, rng: Rng | None = None):
        Module.__init__(self)
        self.stages = []
        chans = list(channels)
        for i in range(len(chans) - 1):
            deep, skip = chans[-1 - i], chans[-2 - i]
            self.stages.append(self.add(f"stage{i + 1}", UNetStage(deep, skip, skip, rng)))
        self.out_channels = chans[0]


class SegHead(Module):
    """Conv3x3-BN-ReLU6, 1x1 classifier with bias, bilinear upsampling."""

    def __init__(self, in_ch: int, num_classes: int, rng: Rng | None, upsample: int = 4):
        super().__init__()
        self.conv = self.add("conv", Conv2d(ConvSpec.same(in_ch, in_ch, 3), rng))
        self.bn = self.add("bn", BatchNorm2d(in_ch))
        self.act = self.add("act", Activation(ActivationKind.RELU6))
        self.classifier = self.add("classifier", Conv2d(ConvSpec(in_ch, num_classes, 1, bias=True), rng))
        self.up = self.add("upsample", Upsample(upsample)) if upsample > 1 else None

    def forward(self, x):
        y = self.classifier(self.act(self.bn(self.conv(x))))
        return y if self.up is None else self.up(y)

    def backward(self, grad):
        if self.up is not None:
            grad = self.up.backward(grad)
        return self.conv.backward(self.bn.backward(self.act.backward(self.classifier.backward(grad))))
