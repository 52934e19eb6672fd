"""Synthetic label corruption.

Each example draws its randomness from a counter-based stream keyed by
``(seed, example index)``, so the fate of example ``i`` does not depend on how
many other examples are corrupted alongside it or on their order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIF = "UNIF"
FLIP = "FLIP"

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    rho: float
    num_classes: int
    seed: int = 0

    def __post_init__(self):
        kind = str(self.kind).upper()
        object.__setattr__(self, "kind", kind)
        if kind not in (UNIF, FLIP):
            raise NoiseError(f"unknown noise kind {self.kind!r}; expected UNIF or FLIP")
        if not 0.0 <= float(self.rho) <= 1.0:
            raise NoiseError(f"rho must lie in [0, 1], got {self.rho}")
        if self.num_classes < 2:
            raise NoiseError(f"need at least 2 classes, got {self.num_classes}")


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    return x ^ (x >> np.uint64(31))


def example_uniforms(seed: int, n: int, stream: int) -> np.ndarray:
    """Uniform [0, 1) draws, one per example index, for a given stream id."""
    key = _splitmix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    key = _splitmix64(np.array([key ^ np.uint64(stream)], dtype=np.uint64))[0]
    with np.errstate(over="ignore"):
        bits = _splitmix64(np.arange(n, dtype=np.uint64) ^ key)
        bits = _splitmix64(bits)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _check_labels(labels, num_classes):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise NoiseError(f"labels must be a vector, got shape {labels.shape}")
    labels = labels.astype(np.int64)
    bad = (labels < 0) | (labels >= num_classes)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise NoiseError(f"label {labels[idx]} at index {idx} outside [0, {num_classes})")
    return labels


def inject_unif(labels, spec: NoiseSpec) -> np.ndarray:
    """With probability rho, redraw uniformly over all C classes (possibly the same one)."""
    if spec.kind != UNIF:
        raise NoiseError(f"inject_unif called with {spec.kind} spec")
    labels = _check_labels(labels, spec.num_classes)
    n = labels.shape[0]
    hit = example_uniforms(spec.seed, n, 0) < spec.rho
    draw = np.minimum((example_uniforms(spec.seed, n, 1) * spec.num_classes).astype(np.int64), spec.num_classes - 1)
    return np.where(hit, draw, labels)


def inject_flip(labels, spec: NoiseSpec) -> np.ndarray:
    """With probability rho, move to one of the other C-1 classes uniformly."""
    if spec.kind != FLIP:
        raise NoiseError(f"inject_flip called with {spec.kind} spec")
    labels = _check_labels(labels, spec.num_classes)
    n = labels.shape[0]
    c = spec.num_classes
    hit = example_uniforms(spec.seed, n, 0) < spec.rho
    r = np.minimum((example_uniforms(spec.seed, n, 1) * (c - 1)).astype(np.int64), c - 2)
    flipped = r + (r >= labels)
    return np.where(hit, flipped, labels)


def inject(labels, spec: NoiseSpec) -> np.ndarray:
    return inject_unif(labels, spec) if spec.kind == UNIF else inject_flip(labels, spec)


def analytic_corruption_matrix(spec: NoiseSpec) -> np.ndarray:
    """Column-stochastic ``M[i, j] = P(noisy=i | true=j)``."""
    c, rho = spec.num_classes, spec.rho
    if spec.kind == UNIF:
        m = np.full((c, c), rho / c)
        np.fill_diagonal(m, 1.0 - rho + rho / c)
    else:
        m = np.full((c, c), rho / (c - 1))
        np.fill_diagonal(m, 1.0 - rho)
    return m


def empirical_corruption_matrix(true_labels, noisy_labels, num_classes: int) -> np.ndarray:
    """Column ``j`` is the distribution of noisy labels among examples whose true label is ``j``."""
    t = _check_labels(true_labels, num_classes)
    y = _check_labels(noisy_labels, num_classes)
    if t.shape != y.shape:
        raise NoiseError(f"length mismatch: {t.shape[0]} true vs {y.shape[0]} noisy labels")
    counts = np.zeros((num_classes, num_classes))
    np.add.at(counts, (y, t), 1.0)
    totals = counts.sum(axis=0)
    empty = np.flatnonzero(totals == 0)
    if empty.size:
        raise NoiseError(f"class {int(empty[0])} has no examples; its column is undefined")
    return counts / totals
