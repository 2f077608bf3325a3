"""Finite-difference gradient oracle and the analytic-vs-numeric comparison.

The oracle is deliberately independent of the autodiff engine: it only ever
calls the loss as a black-box float function of the parameter values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError
from .tensor import Tensor, zero_grads


def finite_diff_grad(
    f: Callable[[], float], params: dict[str, Tensor], h: float = 1e-4
) -> dict[str, np.ndarray]:
    """Central differences (f(p+h) - f(p-h)) / 2h per coordinate of every
    parameter. `f` must be deterministic and read the live parameter values.
    """
    if h <= 0:
        raise ParameterError(f"step h must be positive, got {h}")
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f()
            flat[i] = orig - h
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    per_param: dict[str, float]

    def ok(self, rtol: float = 1e-3) -> bool:
        return self.max_rel_error <= rtol


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def check_gradients(
    loss_fn: Callable[[], Tensor], params: dict[str, Tensor], h: float = 1e-4
) -> GradCheckReport:
    """Compare backward-pass gradients of `loss_fn` against the oracle.

    `loss_fn` rebuilds the forward graph on every call so the oracle sees
    fresh values after each parameter nudge.
    """
    zero_grads(params.values())
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }
    numeric = finite_diff_grad(lambda: float(loss_fn().data), params, h=h)
    per_param = {}
    worst, worst_name = 0.0, ""
    for name in params:
        err = float(relative_errors(analytic[name], numeric[name]).max()) if analytic[
            name
        ].size else 0.0
        per_param[name] = err
        if err >= worst:
            worst, worst_name = err, name
    return GradCheckReport(max_rel_error=worst, worst_param=worst_name, per_param=per_param)
