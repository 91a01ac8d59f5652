from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import ParamSet


@dataclass
class GradCheckResult:
    n_coords: int
    max_rel_error: float
    worst_param: str

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def rel_error(a, b, floor=1e-6):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def check_param_gradients(loss_and_backward: Callable[[], float], loss_only: Callable[[], float],
                          params: ParamSet, n_coords: int, rng: np.random.Generator,
                          step: float = 1e-6) -> GradCheckResult:
    """Compare reverse-mode gradients with central differences.

    ``loss_and_backward`` must zero nothing itself: it runs a recorded forward
    pass and backward so each Param.grad holds d(loss)/d(param).
    ``loss_only`` re-evaluates the scalar loss at the current parameter values.
    ``n_coords`` coordinates are sampled uniformly across all parameters.
    """
    params.zero_grad()
    loss_and_backward()
    names = list(params)
    sizes = np.array([params[n].value.size for n in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    picks = rng.choice(total, size=min(n_coords, total), replace=n_coords > total)
    worst, worst_name = 0.0, ""
    for flat_idx in picks:
        k = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        p = params[names[k]]
        local = np.unravel_index(int(flat_idx - offsets[k]), p.value.shape)
        analytic = p.grad[local]
        orig = p.value[local]
        val = p.value.copy()
        val[local] = orig + step
        p.value = val
        fp = loss_only()
        val = val.copy()
        val[local] = orig - step
        p.value = val
        fm = loss_only()
        val = val.copy()
        val[local] = orig
        p.value = val
        numeric = (fp - fm) / (2 * step)
        err = float(rel_error(analytic, numeric))
        if err > worst:
            worst, worst_name = err, p.name
    return GradCheckResult(len(picks), worst, worst_name)
