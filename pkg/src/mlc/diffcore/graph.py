"""Define-by-run computation graph and reverse-mode gradient extraction.

A :class:`Graph` is a tape. Every primitive appends one :class:`Node` holding
its forward value, its parents, a forward closure (used by :meth:`Graph.replay`)
and a vector-Jacobian closure used by :func:`backward`. Graphs are cheap and
meant to be thrown away after one forward/backward pass.
"""

from __future__ import annotations

import numpy as np

from .params import ParamVector

DTYPE = np.float64


class DiffcoreError(ValueError):
    """Base class for engine errors."""


class ShapeError(DiffcoreError):
    def __init__(self, primitive: str, *shapes):
        self.primitive = primitive
        self.shapes = tuple(tuple(s) for s in shapes)
        super().__init__(
            f"{primitive}: incompatible shapes "
            + " and ".join(str(s) for s in self.shapes)
        )


class IndexRangeError(DiffcoreError):
    def __init__(self, primitive: str, bad_index: int, size: int):
        self.primitive = primitive
        self.bad_index = int(bad_index)
        self.size = int(size)
        super().__init__(
            f"{primitive}: index {self.bad_index} out of range [0, {self.size})"
        )


class GraphMismatchError(DiffcoreError):
    pass


class Node:
    """One recorded value in a :class:`Graph`."""

    __slots__ = ("graph", "id", "value", "op", "parents", "forward_fn", "vjp", "name")

    def __init__(self, graph, id, value, op, parents=(), forward_fn=None, vjp=None, name=None):
        self.graph = graph
        self.id = id
        self.value = value
        self.op = op
        self.parents = tuple(parents)
        self.forward_fn = forward_fn
        self.vjp = vjp
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node(#{self.id} {self.op}{label} shape={self.shape})"


class Graph:
    """Tape of nodes in creation (hence topological) order."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.barriers: set[int] = set()
        self.params: dict[str, Node] = {}

    def _record(self, op, value, parents=(), forward_fn=None, vjp=None, name=None) -> Node:
        for p in parents:
            if p.graph is not self:
                raise GraphMismatchError(f"{op}: operand belongs to a different graph")
        node = Node(self, len(self.nodes), value, op, parents, forward_fn, vjp, name)
        self.nodes.append(node)
        return node

    def constant(self, value, name=None) -> Node:
        return self._record("const", np.asarray(value, dtype=DTYPE), name=name)

    def index_constant(self, value, name=None) -> Node:
        """Integer-valued leaf (class ids for embedding lookup)."""
        return self._record("index", np.asarray(value, dtype=np.int64), name=name)

    def param(self, name: str, value) -> Node:
        if name in self.params:
            raise DiffcoreError(f"parameter {name!r} already bound in this graph")
        node = self._record("param", np.asarray(value, dtype=DTYPE), name=name)
        self.params[name] = node
        return node

    def bind(self, params: ParamVector, prefix: str = "") -> dict[str, Node]:
        """Register every segment of ``params`` as a leaf; keys are unprefixed."""
        return {name: self.param(prefix + name, arr) for name, arr in params.items()}

    def replay(self, node: Node) -> np.ndarray:
        """Recompute ``node`` from the graph's leaves, ignoring cached values."""
        values: dict[int, np.ndarray] = {}
        for n in self.nodes[: node.id + 1]:
            if n.forward_fn is None:
                values[n.id] = n.value
            else:
                values[n.id] = n.forward_fn(*(values[p.id] for p in n.parents))
        return values[node.id]


def stop_gradient(node: Node) -> Node:
    """Identity in the forward pass, hard zero in the backward pass."""
    out = node.graph._record(
        "stop_gradient", node.value, (node,), forward_fn=lambda v: v, vjp=None
    )
    node.graph.barriers.add(out.id)
    return out


def backward(graph: Graph, output: Node, seed=None) -> dict[str, np.ndarray]:
    """Return d(seed . output)/d(param) for every parameter bound in ``graph``.

    Parameters unreachable from ``output`` (or reachable only across a
    stop-gradient barrier) get exact zeros.
    """
    if output.graph is not graph:
        raise GraphMismatchError("backward: output node belongs to a different graph")
    if seed is None:
        seed = np.ones_like(output.value)
    seed = np.asarray(seed, dtype=DTYPE)
    if seed.shape != output.value.shape:
        raise ShapeError("backward(seed)", seed.shape, output.value.shape)

    grads: dict[int, np.ndarray] = {output.id: seed}
    for node in reversed(graph.nodes[: output.id + 1]):
        g = grads.pop(node.id, None)
        if g is None:
            continue
        if node.op == "param":
            grads[node.id] = g  # keep for collection below
            continue
        if node.id in graph.barriers or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None:
                continue
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + pg
            else:
                grads[parent.id] = pg
    return {
        name: grads.get(node.id, np.zeros_like(node.value))
        for name, node in graph.params.items()
    }


def grads_to_params(grads: dict[str, np.ndarray], template: ParamVector, prefix: str = "") -> ParamVector:
    """Collect the segments of ``template`` (looked up under ``prefix``) into a ParamVector."""
    return ParamVector({name: grads[prefix + name] for name in template.names})

