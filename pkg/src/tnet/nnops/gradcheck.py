"""Central finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..errors import NumericError
from ..tensor import Rng


@dataclass
class TensorReport:
    name: str
    max_rel_err: float
    checked: int
    worst_index: tuple = ()


@dataclass
class GradcheckReport:
    tol: float
    tensors: list[TensorReport] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return max((t.max_rel_err for t in self.tensors), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol

    def lines(self) -> list[str]:
        out = []
        for t in self.tensors:
            status = "ok" if t.max_rel_err <= self.tol else "FAIL"
            out.append(f"{t.name:<48} checked={t.checked:<5} max_rel_err={t.max_rel_err:.3e} {status}")
        return out


def rel_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradcheck(
    fn: Callable[[], float],
    tensors: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    h: float = 1e-4,
    tol: float = 1e-3,
    max_per_tensor: int | None = None,
    rng: Rng | None = None,
    floor: float = 1e-6,
) -> GradcheckReport:
    """Compare ``analytic`` against central differences of ``fn``.

    ``fn`` must read the arrays in ``tensors`` (they are perturbed in place and
    restored). Arrays should be float64. With ``max_per_tensor`` only that many
    randomly chosen entries of each tensor are probed.
    """
    rng = rng or Rng(0)
    report = GradcheckReport(tol=tol)
    for name, arr in tensors.items():
        if arr.dtype != np.float64:
            raise NumericError(f"gradcheck needs float64 tensors, {name} is {arr.dtype}")
        grad = analytic[name]
        if grad.shape != arr.shape:
            raise NumericError(f"analytic gradient for {name} has shape {grad.shape}, expected {arr.shape}")
        flat = arr.reshape(-1)
        if not np.all(np.isfinite(grad)):
            bad = np.unravel_index(int(np.argmax(~np.isfinite(grad))), grad.shape)
            raise NumericError(f"non-finite analytic gradient in {name} at {bad}")
        idxs = np.arange(flat.size)
        if max_per_tensor is not None and flat.size > max_per_tensor:
            idxs = np.sort(rng.permutation(flat.size)[:max_per_tensor])
        worst, worst_i = 0.0, ()
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            fp = fn()
            flat[i] = orig - h
            fm = fn()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite loss while perturbing {name}{np.unravel_index(i, arr.shape)}")
            num = (fp - fm) / (2 * h)
            err = rel_error(float(grad.reshape(-1)[i]), num, floor)
            if err > worst:
                worst, worst_i = err, tuple(int(v) for v in np.unravel_index(i, arr.shape))
        report.tensors.append(TensorReport(name, worst, len(idxs), worst_i))
    return report
