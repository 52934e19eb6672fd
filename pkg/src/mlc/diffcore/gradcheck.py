from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import DiffcoreError, Graph, Node, backward
from .params import ParamVector

LossFn = Callable[[ParamVector], "tuple[Graph, Node]"]


class NonFiniteLossError(DiffcoreError):
    pass


def relative_error(a, b, floor: float = 1e-6) -> np.ndarray:
    """Coordinate-wise ``|a - b| / max(|a|, |b|, floor)``.

    The floor keeps coordinates whose true gradient is ~0 from amplifying
    finite-difference round-off into huge relative errors.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


@dataclass
class GradCheckReport:
    tol: float
    max_rel_error: dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol

    def __str__(self):
        lines = [f"gradcheck {'PASS' if self.passed else 'FAIL'} (tol={self.tol:g})"]
        lines += [f"  {k}: {v:.3e}" for k, v in self.max_rel_error.items()]
        return "\n".join(lines)


def _scalar_loss(loss_fn, params):
    _, node = loss_fn(params)
    value = float(node.value)
    if not np.isfinite(value):
        raise NonFiniteLossError(f"loss is not finite: {value}")
    return value


def finite_difference_grad(loss_fn: LossFn, params: ParamVector, eps: float = 1e-5) -> ParamVector:
    """Central differences of ``loss_fn`` over every coordinate of ``params``."""
    base = params.flat()
    out = np.empty_like(base)
    for i in range(base.size):
        probe = base.copy()
        probe[i] = base[i] + eps
        up = _scalar_loss(loss_fn, params.unflatten(probe))
        probe[i] = base[i] - eps
        down = _scalar_loss(loss_fn, params.unflatten(probe))
        out[i] = (up - down) / (2 * eps)
    return params.unflatten(out)


def grad_check(loss_fn: LossFn, params: ParamVector, tol: float = 1e-4, eps: float = 1e-5, floor: float = 1e-6) -> GradCheckReport:
    """Compare reverse-mode gradients of ``loss_fn`` against central differences.

    ``loss_fn(params)`` must build a fresh graph, bind ``params`` with
    ``graph.bind(params)`` (no prefix) and return ``(graph, scalar_loss_node)``.
    """
    graph, node = loss_fn(params)
    if not np.isfinite(node.value).all():
        raise NonFiniteLossError(f"loss is not finite: {node.value}")
    analytic = backward(graph, node)
    numeric = finite_difference_grad(loss_fn, params, eps)
    report = GradCheckReport(tol=tol)
    for name in params.names:
        err = relative_error(analytic[name], numeric[name], floor)
        report.max_rel_error[name] = float(err.max()) if err.size else 0.0
    return report
