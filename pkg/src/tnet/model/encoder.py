"""Four-stage residual encoder (ResNet-18 layout, configurable widths)."""
from __future__ import annotations

from ..errors import ShapeError
from ..nnops.conv import ConvSpec
from ..tensor import Rng
from .layers import Activation, BatchNorm2d, Conv2d, MaxPool, Module, Sequential, conv_bn, log_activation


class BasicBlock(Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int, rng: Rng | None):
        super().__init__()
        self.conv1 = self.add("conv1", Conv2d(ConvSpec(in_ch, out_ch, 3, stride, 1), rng))
        self.bn1 = self.add("bn1", BatchNorm2d(out_ch))
        self.act1 = self.add("act1", Activation("relu"))
        self.conv2 = self.add("conv2", Conv2d(ConvSpec(out_ch, out_ch, 3, 1, 1), rng))
        self.bn2 = self.add("bn2", BatchNorm2d(out_ch))
        self.downsample = None
        if stride != 1 or in_ch != out_ch:
            self.downsample = self.add("downsample", Sequential(
                ("conv", Conv2d(ConvSpec(in_ch, out_ch, 1, stride, 0), rng)),
                ("bn", BatchNorm2d(out_ch)),
            ))
        self.act2 = self.add("act2", Activation("relu"))

    def forward(self, x):
        y = self.bn2(self.conv2(self.act1(self.bn1(self.conv1(x)))))
        shortcut = x if self.downsample is None else self.downsample(x)
        s = y + shortcut
        log_activation(s)
        return self.act2(s)

    def backward(self, grad):
        g = self.act2.backward(grad)
        g_short = g if self.downsample is None else self.downsample.backward(g)
        g_main = self.conv1.backward(self.bn1.backward(self.act1.backward(self.conv2.backward(self.bn2.backward(g)))))
        return g_main + g_short


class Encoder(Module):
    """Stem (7x7/2 conv, BN, ReLU, 3x3/2 max pool) followed by four stages of two blocks.

    Emits ``[R1, R2, R3, R4]`` at strides 4, 8, 16, 32.
    """

    def __init__(self, channels, rng: Rng | None, in_ch: int = 3):
        super().__init__()
        c1 = channels[0]
        self.stem = self.add("stem", Sequential(
            ("conv", Conv2d(ConvSpec(in_ch, c1, 7, 2, 3), rng, input_grad=False)),
            ("bn", BatchNorm2d(c1)),
            ("act", Activation("relu")),
            ("pool", MaxPool()),
        ))
        self.stages = []
        prev = c1
        for i, c in enumerate(channels):
            stride = 1 if i == 0 else 2
            stage = Sequential(
                ("block1", BasicBlock(prev, c, stride, rng)),
                ("block2", BasicBlock(c, c, 1, rng)),
            )
            self.stages.append(self.add(f"stage{i + 1}", stage))
            prev = c

    def forward(self, x):
        h, w = x.shape[2], x.shape[3]
        if h % 32 or w % 32 or h < 32 or w < 32:
            raise ShapeError(f"input spatial size {h}x{w} must be a positive multiple of 32")
        x = self.stem(x)
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats

    def backward(self, grads):
        """``grads[i]`` is the gradient arriving at R(i+1) from the decoder (or None)."""
        g = None
        for stage, gi in zip(reversed(self.stages), reversed(grads)):
            if gi is not None:
                g = gi if g is None else g + gi
            g = stage.backward(g)
        return self.stem.backward(g)
