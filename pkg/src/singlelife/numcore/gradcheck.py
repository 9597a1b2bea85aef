"""Finite-difference verification of the backward pass.

Runs a model fragment twice per parameter coordinate (central differences,
float64 only) and compares against the analytic gradients. Relative error is
|analytic - numeric| / max(1, |analytic|, |numeric|), so tiny gradients are
compared absolutely and large ones relatively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ContractError, NumericError
from .tensor import Tensor, gradients


@dataclass
class GradCheckReport:
    passed: bool
    tol: float
    max_rel_err: float
    worst_leaf: str
    per_leaf: dict = field(default_factory=dict)

    def failing_leaves(self) -> list[str]:
        return [k for k, v in self.per_leaf.items() if v > self.tol]

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"grad_check {status}: max rel err {self.max_rel_err:.3e} "
                f"(tol {self.tol:.1e}, worst leaf '{self.worst_leaf}')")


def grad_check(fragment: Callable[[dict[str, Tensor]], Tensor],
               params: dict[str, np.ndarray],
               tol: float = 1e-6,
               h: float = 1e-5) -> GradCheckReport:
    """Check `fragment`'s analytic gradients against central differences.

    `fragment` maps a dict of named leaf Tensors to a scalar loss Tensor and
    must be a pure function of them. All arithmetic runs in float64; passing
    float32 arrays is fine, they are upcast here.
    """
    base = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    def run(values: dict[str, np.ndarray]):
        leaves = {k: Tensor(v, requires_grad=True, name=k, dtype=np.float64)
                  for k, v in values.items()}
        return fragment(leaves), leaves

    try:
        loss, leaves = run(base)
    except NumericError as exc:
        raise NumericError(f"grad_check aborted: forward pass not finite ({exc})") from exc
    if loss.data.size != 1:
        raise ContractError("grad_check fragment must return a scalar loss")
    analytic = gradients(loss, leaves)

    per_leaf: dict[str, float] = {}
    worst = ("", 0.0)
    for name in base:
        a_grad = analytic[name]
        num = np.zeros_like(base[name])
        flat = base[name].reshape(-1)
        nflat = num.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(run(base)[0].data)
            flat[i] = orig - h
            lm = float(run(base)[0].data)
            flat[i] = orig
            nflat[i] = (lp - lm) / (2.0 * h)
        denom = np.maximum(1.0, np.maximum(np.abs(a_grad), np.abs(num)))
        rel = float((np.abs(a_grad - num) / denom).max()) if flat.size else 0.0
        per_leaf[name] = rel
        if rel >= worst[1]:
            worst = (name, rel)
    max_err = worst[1]
    return GradCheckReport(passed=max_err <= tol, tol=tol, max_rel_err=max_err,
                           worst_leaf=worst[0], per_leaf=per_leaf)
