from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np


class ParamVector:
    """Ordered, named collection of float64 arrays viewed as one flat vector.

    Arithmetic (``+``, ``-``, ``*``, ``/``) works segment-wise against another
    ParamVector with the same layout or against a scalar.
    """

    __slots__ = ("_segments",)

    def __init__(self, segments: Mapping[str, np.ndarray]):
        self._segments = {
            str(k): np.array(v, dtype=np.float64, copy=True) for k, v in segments.items()
        }

    @property
    def names(self) -> list[str]:
        return list(self._segments)

    @property
    def shapes(self) -> dict[str, tuple]:
        return {k: v.shape for k, v in self._segments.items()}

    @property
    def total_len(self) -> int:
        return sum(v.size for v in self._segments.values())

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._segments.items())

    def __getitem__(self, name: str) -> np.ndarray:
        return self._segments[name]

    def __contains__(self, name: str) -> bool:
        return name in self._segments

    def __len__(self) -> int:
        return len(self._segments)

    def __repr__(self):
        inner = ", ".join(f"{k}{list(v.shape)}" for k, v in self._segments.items())
        return f"ParamVector({inner})"

    def flat(self) -> np.ndarray:
        if not self._segments:
            return np.zeros(0)
        return np.concatenate([v.ravel() for v in self._segments.values()])

    def unflatten(self, flat) -> "ParamVector":
        """Inverse of :meth:`flat` using this vector's layout."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.total_len,):
            raise ValueError(f"unflatten: expected length {self.total_len}, got shape {flat.shape}")
        out, offset = {}, 0
        for name, arr in self._segments.items():
            out[name] = flat[offset : offset + arr.size].reshape(arr.shape)
            offset += arr.size
        return ParamVector(out)

    def copy(self) -> "ParamVector":
        return ParamVector(self._segments)

    def zeros_like(self) -> "ParamVector":
        return ParamVector({k: np.zeros_like(v) for k, v in self._segments.items()})

    def full_like(self, value: float) -> "ParamVector":
        return ParamVector({k: np.full_like(v, value) for k, v in self._segments.items()})

    def same_layout(self, other: "ParamVector") -> bool:
        return self.shapes == other.shapes and self.names == other.names

    def _binary(self, other, fn, opname):
        if isinstance(other, ParamVector):
            if not self.same_layout(other):
                raise ValueError(f"{opname}: ParamVector layouts differ")
            return ParamVector({k: fn(v, other._segments[k]) for k, v in self._segments.items()})
        return ParamVector({k: fn(v, other) for k, v in self._segments.items()})

    def __add__(self, other):
        return self._binary(other, np.add, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract, "sub")

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a, "rsub")

    def __mul__(self, other):
        return self._binary(other, np.multiply, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide, "div")

    def __neg__(self):
        return ParamVector({k: -v for k, v in self._segments.items()})

    def dot(self, other: "ParamVector") -> float:
        if not self.same_layout(other):
            raise ValueError("dot: ParamVector layouts differ")
        return float(sum(np.vdot(v, other._segments[k]) for k, v in self._segments.items()))

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self._segments.values())

    def allclose(self, other: "ParamVector", rtol=1e-12, atol=0.0) -> bool:
        return self.same_layout(other) and np.allclose(self.flat(), other.flat(), rtol=rtol, atol=atol)
