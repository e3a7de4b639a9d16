"""Full segmentation network, its configuration, and the parameter registry."""
from __future__ import annotations

import statistics
import time
from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, StateError
from ..nnops.activation import ActivationKind
from ..nnops.conv import TRANSPOSE_PADDING
from ..tensor import Rng
from .decoder import UPSAMPLE, SegHead, TerraceDecoder, UNetDecoder
from .encoder import Encoder
from .layers import Module, record_activations

PRESETS = {
    "desk": (16, 32, 64, 128),
    "paper": (64, 128, 256, 512),
}
TRANSPOSE_OPTIONS = (UPSAMPLE, 3, 4, 6)
LATERAL_OPTIONS = (None, 1, 3, 5, 7)
DECODERS = ("terrace", "unet")


@dataclass(frozen=True)
class TerraceConfig:
    stage_channels: tuple = PRESETS["desk"]
    num_classes: int = 6
    transpose_kernel: int | str = 3
    lateral_kernel: int | None = 3
    activation: ActivationKind = ActivationKind.RELU6
    decoder: str = "terrace"

    def __post_init__(self):
        chans = tuple(int(c) for c in self.stage_channels)
        object.__setattr__(self, "stage_channels", chans)
        if len(chans) < 2 or any(b <= a for a, b in zip(chans, chans[1:])) or chans[0] < 1:
            raise ConfigError(f"stage_channels must be strictly increasing positive widths, got {chans}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        tk = self.transpose_kernel
        if isinstance(tk, str) and tk.lower() == UPSAMPLE:
            object.__setattr__(self, "transpose_kernel", UPSAMPLE)
        elif int(tk) not in TRANSPOSE_PADDING:
            raise ConfigError(f"transpose_kernel must be one of {TRANSPOSE_OPTIONS}, got {tk!r}")
        else:
            object.__setattr__(self, "transpose_kernel", int(tk))
        lk = self.lateral_kernel
        if lk is not None and (int(lk) < 1 or int(lk) % 2 == 0):
            raise ConfigError(f"lateral_kernel must be odd or None, got {lk!r}")
        object.__setattr__(self, "activation", ActivationKind.parse(self.activation))
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")

    @classmethod
    def preset(cls, name: str, **kw) -> "TerraceConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(stage_channels=PRESETS[name], **kw)

    def with_(self, **kw) -> "TerraceConfig":
        return replace(self, **kw)


class ParamRegistry(OrderedDict):
    """Ordered ``path -> Param`` map; iteration order is construction order."""

    @classmethod
    def from_module(cls, module: Module) -> "ParamRegistry":
        reg = cls()
        for path, p in module.named_params():
            if path in reg:
                raise StateError(f"duplicate parameter path {path}")
            reg[path] = p
        return reg

    def zero_grad(self) -> None:
        for p in self.values():
            p.grad[...] = 0

    def count(self) -> int:
        return sum(p.value.size for p in self.values())


class TNet(Module):
    def __init__(self, cfg: TerraceConfig, rng: Rng | None = None, in_ch: int = 3):
        super().__init__()
        self.cfg = cfg
        self.encoder = self.add("encoder", Encoder(cfg.stage_channels, rng, in_ch))
        if cfg.decoder == "terrace":
            self.decoder = self.add("decoder.terrace", TerraceDecoder(
                cfg.stage_channels, cfg.transpose_kernel, cfg.lateral_kernel, cfg.activation, rng))
        else:
            self.decoder = self.add("decoder.unet", UNetDecoder(cfg.stage_channels, rng))
        self.head = self.add("head", SegHead(cfg.stage_channels[0], cfg.num_classes, rng))
        self.registry = ParamRegistry.from_module(self)
        self.features = None
        self._pending = False

    def forward(self, x):
        self.features = self.encoder(x)
        logits = self.head(self.decoder(self.features))
        self._pending = self.training
        return logits

    def backward(self, grad_logits) -> None:
        """Accumulate exact gradients of ``sum(grad_logits * logits)`` into the registry."""
        if not self._pending:
            raise StateError("model backward requires a training-mode forward pass first")
        self._pending = False
        g = self.head.backward(grad_logits)
        self.encoder.backward(self.decoder.backward(g))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.forward(x), axis=1)

    def state_arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Parameters followed by BN running statistics, keyed by path."""
        out = OrderedDict((k, p.value) for k, p in self.registry.items())
        for path, owner, attr in self.named_buffers():
            out[path] = getattr(owner, attr)
        return out

    def load_arrays(self, arrays) -> None:
        expected = self.state_arrays()
        missing = [k for k in expected if k not in arrays]
        if missing:
            raise StateError(f"checkpoint is missing parameter {missing[0]}")
        extra = [k for k in arrays if k not in expected]
        if extra:
            raise StateError(f"checkpoint has unknown parameter {extra[0]}")
        for k, ref in expected.items():
            if tuple(arrays[k].shape) != ref.shape:
                raise StateError(f"{k}: checkpoint shape {tuple(arrays[k].shape)} != model shape {ref.shape}")
        for k, p in self.registry.items():
            p.value = np.array(arrays[k], dtype=p.value.dtype)
            p.grad = np.zeros_like(p.value)
        for path, owner, attr in self.named_buffers():
            setattr(owner, attr, np.array(arrays[path], dtype=getattr(owner, attr).dtype))


def build(cfg: TerraceConfig, seed: int | None = 0) -> TNet:
    """Build a network; ``seed=None`` leaves every weight at zero (fast, for counting)."""
    return TNet(cfg, Rng(seed) if seed is not None else None)


def count_params(cfg: TerraceConfig, prefix: str = "") -> int:
    """Exact parameter count, optionally restricted to paths starting with ``prefix``."""
    reg = build(cfg, seed=None).registry
    return sum(p.value.size for k, p in reg.items() if k.startswith(prefix))


def activation_bytes(cfg: TerraceConfig, input_shape, dtype=np.float32) -> int:
    """Bytes of every activation a training forward pass keeps alive, from recorded shapes."""
    model = build(cfg, seed=None).astype(dtype)
    with record_activations() as log:
        model.forward(np.zeros(input_shape, dtype))
    return int(sum(nbytes for _, nbytes in log))


def forward_bench(model: TNet, input_shape, iters: int = 10, warmup: int = 3, seed: int = 0) -> dict:
    """Median eval-mode forward latency after ``warmup`` untimed calls."""
    model.eval()
    x = Rng(seed).uniform(0, 1, int(np.prod(input_shape))).reshape(input_shape).astype(np.float32)
    for _ in range(warmup):
        model.forward(x)
    times = []
    for _ in range(max(1, iters)):
        t0 = time.perf_counter()
        model.forward(x)
        times.append(time.perf_counter() - t0)
    med = statistics.median(times)
    return {"median_ms": med * 1e3, "throughput": input_shape[0] / med}
