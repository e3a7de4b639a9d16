"""Stateful layers built on :mod:`tnet.nnops`.

Every layer caches what its backward pass needs during ``forward`` and drops
the cache in ``backward``. Gradients accumulate into ``Param.grad`` until the
optimizer's ``zero_grad``.
"""
from __future__ import annotations

import contextlib
from typing import Iterator

import numpy as np

from .. import nnops
from ..errors import StateError
from ..nnops.activation import ActivationKind
from ..nnops.conv import ConvSpec, ConvTransposeSpec
from ..nnops.norm import BatchNormState
from ..tensor import Rng, default_dtype, he_init

_trace: list | None = None
_activation_log: list | None = None


@contextlib.contextmanager
def record_ops() -> Iterator[list]:
    """Collect ``(owner, op)`` events emitted by decoder stages during forward."""
    global _trace
    prev, _trace = _trace, []
    try:
        yield _trace
    finally:
        _trace = prev


@contextlib.contextmanager
def record_activations() -> Iterator[list]:
    """Collect ``(shape, nbytes)`` for every activation produced during forward."""
    global _activation_log
    prev, _activation_log = _activation_log, []
    try:
        yield _activation_log
    finally:
        _activation_log = prev


def emit(owner: str, op: str) -> None:
    if _trace is not None:
        _trace.append((owner, op))


def log_activation(x: np.ndarray) -> None:
    if _activation_log is not None:
        _activation_log.append((x.shape, x.nbytes))


class Param:
    __slots__ = ("value", "grad", "decay")

    def __init__(self, value: np.ndarray, decay: bool = True):
        self.value = value
        self.grad = np.zeros_like(value)
        self.decay = decay

    def __repr__(self):
        return f"Param(shape={self.value.shape}, decay={self.decay})"


class Module:
    leaf = False

    def __init__(self):
        self._params: dict[str, Param] = {}
        self._children: dict[str, Module] = {}
        self._buffers: tuple[str, ...] = ()
        self.training = True
        self.name = ""

    def add_param(self, name: str, value: np.ndarray, decay: bool = True) -> Param:
        p = Param(value, decay)
        self._params[name] = p
        return p

    def add(self, name: str, module: "Module") -> "Module":
        module.name = name
        self._children[name] = module
        return module

    def named_params(self, prefix: str = "") -> Iterator[tuple[str, Param]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_params(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, "Module", str]]:
        for attr in self._buffers:
            yield prefix + attr, self, attr
        for name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{name}.")

    def modules(self) -> Iterator["Module"]:
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def astype(self, dtype) -> "Module":
        for _, p in self.named_params():
            p.value = p.value.astype(dtype)
            p.grad = p.grad.astype(dtype)
        for _, owner, attr in self.named_buffers():
            setattr(owner, attr, getattr(owner, attr).astype(dtype))
        return self

    def __call__(self, *args):
        out = self.forward(*args)
        if self.leaf and _activation_log is not None:
            log_activation(out)
        return out

    def forward(self, *args):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def _take(self, attr: str = "_cache"):
        value = getattr(self, attr, None)
        if value is None:
            raise StateError(f"{type(self).__name__} {self.name!r}: backward called without a cached forward")
        setattr(self, attr, None)
        return value


class Conv2d(Module):
    leaf = True

    def __init__(self, spec: ConvSpec, rng: Rng | None, input_grad: bool = True):
        super().__init__()
        self.spec = spec
        self.input_grad = input_grad
        fan_in = spec.in_ch * spec.kernel * spec.kernel
        w = he_init(spec.weight_shape, fan_in, rng) if rng is not None else np.zeros(spec.weight_shape, default_dtype())
        self.weight = self.add_param("weight", w)
        self.bias = self.add_param("bias", np.zeros(spec.out_ch, default_dtype()), decay=False) if spec.bias else None
        self._cache = None

    def forward(self, x):
        self._cache = x
        return nnops.conv2d_fwd(x, self.weight.value, self.spec, None if self.bias is None else self.bias.value)

    def backward(self, grad):
        x = self._take()
        grad_x, grad_w = nnops.conv2d_bwd(x, self.weight.value, grad, self.spec)
        self.weight.grad += grad_w
        if self.bias is not None:
            self.bias.grad += grad.sum(axis=(0, 2, 3))
        return grad_x if self.input_grad else None


class ConvTranspose2d(Module):
    leaf = True

    def __init__(self, spec: ConvTransposeSpec, rng: Rng | None):
        super().__init__()
        self.spec = spec
        # each output pixel sees about in_ch * (k / stride)^2 taps
        fan_in = max(1, spec.in_ch * spec.kernel * spec.kernel // 4)
        w = he_init(spec.weight_shape, fan_in, rng) if rng is not None else np.zeros(spec.weight_shape, default_dtype())
        self.weight = self.add_param("weight", w)
        self._cache = None

    def forward(self, x):
        self._cache = x
        return nnops.conv_transpose2d_fwd(x, self.weight.value, self.spec)

    def backward(self, grad):
        x = self._take()
        grad_x, grad_w = nnops.conv_transpose2d_bwd(x, self.weight.value, grad, self.spec)
        self.weight.grad += grad_w
        return grad_x


class BatchNorm2d(Module):
    leaf = True

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        dt = default_dtype()
        self.gamma = self.add_param("gamma", np.ones(channels, dt), decay=False)
        self.beta = self.add_param("beta", np.zeros(channels, dt), decay=False)
        self.running_mean = np.zeros(channels, dt)
        self.running_var = np.ones(channels, dt)
        self._buffers = ("running_mean", "running_var")
        self.momentum, self.eps = momentum, eps
        self._cache = None

    def state(self) -> BatchNormState:
        return BatchNormState(
            self.gamma.value, self.beta.value, self.running_mean, self.running_var,
            self.momentum, self.eps, self.training,
        )

    def forward(self, x):
        st = self.state()
        y = nnops.batchnorm_fwd(x, st)
        self.running_mean, self.running_var = st.running_mean, st.running_var
        self._cache = x
        return y

    def backward(self, grad):
        x = self._take()
        grad_x, grad_gamma, grad_beta = nnops.batchnorm_bwd(x, self.state(), grad)
        self.gamma.grad += grad_gamma
        self.beta.grad += grad_beta
        return grad_x


class Activation(Module):
    leaf = True

    def __init__(self, kind):
        super().__init__()
        self.kind = ActivationKind.parse(kind)
        self._cache = None

    def forward(self, x):
        self._cache = x
        return nnops.activation_fwd(x, self.kind)

    def backward(self, grad):
        return nnops.activation_bwd(self._take(), grad, self.kind)


class MaxPool(Module):
    leaf = True

    def forward(self, x):
        y, arg = nnops.maxpool3x3s2_fwd(x)
        self._cache = (arg, x.shape)
        return y

    def backward(self, grad):
        arg, shape = self._take()
        return nnops.maxpool3x3s2_bwd(grad, arg, shape)


class Upsample(Module):
    leaf = True

    def __init__(self, factor: int):
        super().__init__()
        self.factor = factor

    def forward(self, x):
        self._cache = True
        return nnops.bilinear_upsample(x, self.factor)

    def backward(self, grad):
        self._take()
        return nnops.bilinear_upsample_bwd(grad, self.factor)


class Sequential(Module):
    def __init__(self, *named: tuple[str, Module]):
        super().__init__()
        self.order = []
        for name, m in named:
            self.add(name, m)
            self.order.append(m)

    def forward(self, x):
        for m in self.order:
            x = m(x)
        return x

    def backward(self, grad):
        for m in reversed(self.order):
            grad = m.backward(grad)
        return grad


def conv_bn(in_ch, out_ch, kernel, rng, stride=1, act=None, input_grad=True) -> Sequential:
    """Conv (no bias) -> BN [-> activation] with 'same'-style padding."""
    spec = ConvSpec(in_ch, out_ch, kernel, stride, (kernel - 1) // 2, bias=False)
    parts = [("conv", Conv2d(spec, rng, input_grad)), ("bn", BatchNorm2d(out_ch))]
    if act is not None:
        parts.append(("act", Activation(act)))
    return Sequential(*parts)
