"""Differentiable primitives.

Dense row-major float64 only. The only broadcasting is the bias add over the
batch axis. Softmax and log-softmax subtract the row max before exponentiating.
"""

from __future__ import annotations

import numpy as np

from .graph import DiffcoreError, IndexRangeError, Node, ShapeError


def _softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _require_2d(name, *nodes):
    for n in nodes:
        if n.value.ndim != 2:
            raise ShapeError(name, *(m.shape for m in nodes))


def matmul(a: Node, b: Node) -> Node:
    _require_2d("matmul", a, b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.value, b.value
    return a.graph._record(
        "matmul",
        av @ bv,
        (a, b),
        forward_fn=lambda x, y: x @ y,
        vjp=lambda g: (g @ bv.T, av.T @ g),
    )


def bias_add(a: Node, bias: Node) -> Node:
    """``a[batch, n] + bias[n]`` broadcast over rows."""
    if a.value.ndim != 2 or bias.value.ndim != 1 or a.shape[1] != bias.shape[0]:
        raise ShapeError("bias_add", a.shape, bias.shape)
    return a.graph._record(
        "bias_add",
        a.value + bias.value,
        (a, bias),
        forward_fn=lambda x, b: x + b,
        vjp=lambda g: (g, g.sum(axis=0)),
    )


def add(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeError("add", a.shape, b.shape)
    return a.graph._record(
        "add", a.value + b.value, (a, b), forward_fn=np.add, vjp=lambda g: (g, g)
    )


def mul(a: Node, b: Node) -> Node:
    """Elementwise product of equal-shaped tensors."""
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)
    av, bv = a.value, b.value
    return a.graph._record(
        "mul", av * bv, (a, b), forward_fn=np.multiply, vjp=lambda g: (g * bv, g * av)
    )


def scale(a: Node, factor: float) -> Node:
    factor = float(factor)
    return a.graph._record(
        "scale",
        a.value * factor,
        (a,),
        forward_fn=lambda x: x * factor,
        vjp=lambda g: (g * factor,),
    )


def neg(a: Node) -> Node:
    return scale(a, -1.0)


def dot(a: Node, b: Node) -> Node:
    """Inner product of two vectors, producing a scalar."""
    if a.value.ndim != 1 or a.shape != b.shape:
        raise ShapeError("dot", a.shape, b.shape)
    av, bv = a.value, b.value
    return a.graph._record(
        "dot",
        np.asarray(av @ bv),
        (a, b),
        forward_fn=lambda x, y: np.asarray(x @ y),
        vjp=lambda g: (g * bv, g * av),
    )


def tanh(a: Node) -> Node:
    out = np.tanh(a.value)
    return a.graph._record(
        "tanh", out, (a,), forward_fn=np.tanh, vjp=lambda g: (g * (1.0 - out * out),)
    )


def softmax(a: Node) -> Node:
    """Row-wise softmax over the last axis."""
    _require_2d("softmax", a)
    s = _softmax(a.value)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return a.graph._record("softmax", s, (a,), forward_fn=_softmax, vjp=vjp)


def log_softmax(a: Node) -> Node:
    _require_2d("log_softmax", a)
    out = _log_softmax(a.value)
    s = np.exp(out)

    def vjp(g):
        return (g - s * g.sum(axis=-1, keepdims=True),)

    return a.graph._record("log_softmax", out, (a,), forward_fn=_log_softmax, vjp=vjp)


def log(a: Node) -> Node:
    if np.any(a.value <= 0):
        raise DiffcoreError("log: input must be strictly positive")
    av = a.value
    return a.graph._record("log", np.log(av), (a,), forward_fn=np.log, vjp=lambda g: (g / av,))


def embedding(table: Node, indices: Node) -> Node:
    """Row lookup ``table[indices]``; ``indices`` is an integer leaf."""
    if table.value.ndim != 2 or indices.value.ndim != 1:
        raise ShapeError("embedding", table.shape, indices.shape)
    idx = indices.value
    n_rows = table.shape[0]
    bad = (idx < 0) | (idx >= n_rows)
    if np.any(bad):
        raise IndexRangeError("embedding", idx[bad][0], n_rows)

    def vjp(g):
        gt = np.zeros_like(table.value)
        np.add.at(gt, idx, g)
        return (gt, None)

    return table.graph._record(
        "embedding", table.value[idx], (table, indices), forward_fn=lambda t, i: t[i], vjp=vjp
    )


def concat(nodes: list[Node], axis: int = -1) -> Node:
    if not nodes:
        raise DiffcoreError("concat: need at least one operand")
    ndim = nodes[0].value.ndim
    ax = axis % ndim
    for n in nodes[1:]:
        other = [d for i, d in enumerate(n.shape) if i != ax]
        first = [d for i, d in enumerate(nodes[0].shape) if i != ax]
        if n.value.ndim != ndim or other != first:
            raise ShapeError("concat", *(m.shape for m in nodes))
    cuts = np.cumsum([n.shape[ax] for n in nodes])[:-1]

    def vjp(g):
        return tuple(np.split(g, cuts, axis=ax))

    return nodes[0].graph._record(
        "concat",
        np.concatenate([n.value for n in nodes], axis=ax),
        nodes,
        forward_fn=lambda *vs: np.concatenate(vs, axis=ax),
        vjp=vjp,
    )


def row_sum(a: Node) -> Node:
    """Sum over the last axis: ``[batch, n] -> [batch]``."""
    _require_2d("row_sum", a)
    n = a.shape[1]
    return a.graph._record(
        "row_sum",
        a.value.sum(axis=1),
        (a,),
        forward_fn=lambda x: x.sum(axis=1),
        vjp=lambda g: (np.repeat(g[:, None], n, axis=1),),
    )


def mean(a: Node) -> Node:
    """Mean over the batch (leading) axis; a vector reduces to a scalar."""
    if a.value.ndim == 0 or a.shape[0] == 0:
        raise ShapeError("mean", a.shape)
    n = a.shape[0]
    shape = a.shape

    def vjp(g):
        return (np.broadcast_to(g / n, shape).copy(),)

    return a.graph._record(
        "mean", a.value.mean(axis=0), (a,), forward_fn=lambda x: x.mean(axis=0), vjp=vjp
    )
