"""Finite-difference checks for every layer and for the composed network (float64)."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import Module, TerraceConfig, build
from .model.decoder import SegHead, TerraceStage, UNetDecoder
from .model.layers import Activation, BatchNorm2d, Conv2d, ConvTranspose2d, MaxPool, Upsample
from .nnops.conv import ConvSpec, ConvTransposeSpec
from .nnops.gradcheck import GradcheckReport, gradcheck
from .objective import total_loss
from .tensor import Rng, float64_mode


def _rand(rng: Rng, shape, lo=-1.0, hi=1.0) -> np.ndarray:
    return rng.uniform(lo, hi, int(np.prod(shape))).reshape(shape)


def check_module(
    module: Module, inputs: list[np.ndarray], h: float = 1e-4, tol: float = 1e-3,
    seed: int = 0, max_per_tensor: int | None = 24,
) -> GradcheckReport:
    """Check ``module`` on the scalar ``sum(module(*inputs) * G)`` for a fixed random ``G``.

    Inputs and every parameter are probed. The module is converted to float64.
    """
    module.astype(np.float64)
    module.train()
    rng = Rng(seed)
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    out = module.forward(*inputs)
    proj = _rand(rng, out.shape)
    grads_in = module.backward(proj)
    if not isinstance(grads_in, (tuple, list)):
        grads_in = [grads_in]
    for _, p in module.named_params():
        p.grad[...] = 0
    module.forward(*inputs)
    module.backward(proj)

    def fn():
        return float(np.sum(module.forward(*inputs) * proj))

    tensors, analytic = {}, {}
    for i, (x, g) in enumerate(zip(inputs, grads_in)):
        if g is not None:
            tensors[f"input{i}"], analytic[f"input{i}"] = x, g
    for path, p in module.named_params():
        tensors[path], analytic[path] = p.value, p.grad
    return gradcheck(fn, tensors, analytic, h, tol, max_per_tensor, rng.spawn(1))


def check_model(h: float = 1e-4, tol: float = 1e-3, samples: int = 20, seed: int = 0,
                cfg: TerraceConfig | None = None, shape=(1, 3, 64, 64)) -> GradcheckReport:
    """Composed network + total loss; ``samples`` randomly chosen scalar parameters."""
    cfg = cfg or TerraceConfig(num_classes=4)
    with float64_mode():
        model = build(cfg, seed)
    model.astype(np.float64).train()
    rng = Rng(seed + 1)
    x = rng.uniform(0, 1, int(np.prod(shape))).reshape(shape)
    mask = rng.integers(0, cfg.num_classes, shape[0] * shape[2] * shape[3]).reshape(shape[0], shape[2], shape[3])
    out = total_loss(model.forward(x), mask)
    model.backward(out.grad_logits)

    def fn():
        return total_loss(model.forward(x), mask).total

    paths = list(model.registry)
    sizes = np.array([model.registry[p].value.size for p in paths], dtype=np.float64)
    # spread the budget over tensors (size-weighted), then one entry per pick
    picks = rng.random(samples)
    cum = np.cumsum(sizes) / sizes.sum()
    chosen: dict[str, list[int]] = {}
    for u in picks:
        t = int(np.searchsorted(cum, u, side="right"))
        path = paths[min(t, len(paths) - 1)]
        chosen.setdefault(path, []).append(rng.randint(0, model.registry[path].value.size))
    report = GradcheckReport(tol=tol)
    for path, idxs in chosen.items():
        p = model.registry[path]
        flat_v = p.value.reshape(-1)
        sub = GradcheckReport(tol=tol)
        for i in sorted(set(idxs)):
            view = flat_v[i:i + 1]
            r = gradcheck(fn, {f"{path}[{i}]": view}, {f"{path}[{i}]": p.grad.reshape(-1)[i:i + 1]}, h, tol)
            sub.tensors.extend(r.tensors)
        worst = max(sub.tensors, key=lambda t: t.max_rel_err)
        worst.name = f"model:{path}"
        worst.checked = len(set(idxs))
        report.tensors.append(worst)
    return report


def check_loss(h: float = 1e-4, tol: float = 1e-3, seed: int = 0) -> GradcheckReport:
    rng = Rng(seed)
    logits = _rand(rng, (2, 4, 3, 3), -2, 2)
    mask = rng.integers(0, 4, 18).reshape(2, 3, 3)
    mask[0, 0, 0] = 255
    out = total_loss(logits, mask)
    return gradcheck(lambda: total_loss(logits, mask).total, {"total_loss.logits": logits},
                     {"total_loss.logits": out.grad_logits}, h, tol)


@dataclass
class SuiteResult:
    reports: list = field(default_factory=list)  # (label, GradcheckReport)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for _, r in self.reports)

    def lines(self) -> list[str]:
        out = []
        for label, r in self.reports:
            out.append(f"[{'PASS' if r.passed else 'FAIL'}] {label}: max_rel_err={r.max_rel_err:.3e} (tol {r.tol:g})")
            out.extend("    " + line for line in r.lines())
        out.append(f"{'PASS' if self.passed else 'FAIL'}: {len(self.reports)} checks in {self.seconds:.1f}s")
        return out


def suite_cases(seed: int = 0) -> list[tuple[str, Callable[[], tuple[Module, list]]]]:
    rng = Rng(seed)

    def case(make, shapes):
        def build_case():
            with float64_mode():
                m = make()
            return m, [_rand(rng, s) for s in shapes]
        return build_case

    cases = [
        ("conv2d 3x3 (1,2,5,5)->(1,3,5,5)", case(lambda: Conv2d(ConvSpec.same(2, 3, 3, bias=True), rng), [(1, 2, 5, 5)])),
        ("conv2d 3x3 stride 2", case(lambda: Conv2d(ConvSpec(3, 4, 3, 2, 1), rng), [(2, 3, 6, 6)])),
        ("conv2d 1x1 stride 2", case(lambda: Conv2d(ConvSpec(3, 2, 1, 2, 0), rng), [(1, 3, 6, 6)])),
        ("conv2d 7x7 stride 2", case(lambda: Conv2d(ConvSpec(2, 2, 7, 2, 3), rng), [(1, 2, 8, 8)])),
    ]
    for k in (3, 4, 6):
        cases.append((f"conv_transpose2d k={k}", case(lambda k=k: ConvTranspose2d(ConvTransposeSpec(3, 2, k), rng), [(1, 3, 3, 3)])))
    cases += [
        ("batchnorm (2,3,4,4)", case(lambda: _bn_randomized(3, rng), [(2, 3, 4, 4)])),
        ("maxpool 3x3/2", case(MaxPool, [(1, 2, 6, 6)])),
        ("bilinear x2", case(lambda: Upsample(2), [(1, 2, 3, 3)])),
        ("bilinear x4", case(lambda: Upsample(4), [(1, 1, 2, 3)])),
    ]
    for kind in ("relu6", "relu", "gelu", "identity"):
        shape_scale = [(1, 2, 4, 4)]
        cases.append((f"activation {kind}", case(lambda kind=kind: Activation(kind), shape_scale)))
    cases += [
        ("terrace block", case(lambda: TerraceStage(4, 3, 3, 3, 3, "relu6", rng), [(2, 4, 2, 2), (2, 3, 4, 4)])),
        ("terrace block (upsample, no lateral)", case(lambda: TerraceStage(4, 3, 3, "upsample", None, "gelu", rng), [(2, 4, 2, 2), (2, 3, 4, 4)])),
        ("unet 2-stage miniature", case(lambda: _UNetWrap(UNetDecoder((2, 3, 4), rng)), [(2, 2, 8, 8), (2, 3, 4, 4), (2, 4, 2, 2)])),
        ("seg head", case(lambda: SegHead(3, 4, rng), [(2, 3, 4, 4)])),
    ]
    return cases


def _bn_randomized(c: int, rng: Rng) -> BatchNorm2d:
    bn = BatchNorm2d(c)
    bn.gamma.value = rng.uniform(0.5, 1.5, c)
    bn.beta.value = rng.uniform(-0.5, 0.5, c)
    return bn


class _UNetWrap(Module):
    """Adapts the list-in/list-out decoder to the positional check harness."""

    def __init__(self, dec):
        super().__init__()
        self.dec = self.add("unet", dec)

    def forward(self, *feats):
        return self.dec.forward(list(feats))

    def backward(self, grad):
        return self.dec.backward(grad)


def run_suite(h: float = 1e-4, tol: float = 1e-3, seed: int = 0, model_samples: int = 20) -> SuiteResult:
    t0 = time.perf_counter()
    result = SuiteResult()
    for label, make in suite_cases(seed):
        module, inputs = make()
        result.reports.append((label, check_module(module, inputs, h, tol, seed)))
    result.reports.append(("objective: total loss w.r.t. logits", check_loss(h, tol, seed)))
    result.reports.append(("composed terrace model (1,3,64,64)", check_model(h, tol, model_samples, seed)))
    result.seconds = time.perf_counter() - t0
    return result
