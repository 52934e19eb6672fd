"""Small reverse-mode differentiation engine for dense feed-forward nets."""

from .gradcheck import GradCheckReport, NonFiniteLossError, finite_difference_grad, grad_check, relative_error
from .graph import (
    DiffcoreError,
    Graph,
    GraphMismatchError,
    IndexRangeError,
    Node,
    ShapeError,
    backward,
    grads_to_params,
    stop_gradient,
)
from .ops import (
    add,
    bias_add,
    concat,
    dot,
    embedding,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    row_sum,
    scale,
    softmax,
    tanh,
)
from .params import ParamVector

__all__ = [
    "DiffcoreError",
    "GradCheckReport",
    "Graph",
    "GraphMismatchError",
    "IndexRangeError",
    "Node",
    "NonFiniteLossError",
    "ParamVector",
    "ShapeError",
    "add",
    "backward",
    "bias_add",
    "concat",
    "dot",
    "embedding",
    "finite_difference_grad",
    "grad_check",
    "grads_to_params",
    "log",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "neg",
    "relative_error",
    "row_sum",
    "scale",
    "softmax",
    "stop_gradient",
    "tanh",
]
