"""Truncated size grids with trapezoidal weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["SizeGrid", "make_grid", "uniform_grid", "trapezoid_weights"]


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights of the composite trapezoidal rule on ``[nodes[0], nodes[-1]]``."""
    dx = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


@dataclass(frozen=True, eq=False)
class SizeGrid:
    """Strictly increasing positive nodes with trapezoidal weights.

    The left end stands in for ``x = 0``; nothing flows in across it.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 1 or x.size < 2 or x.shape != w.shape:
            raise DomainError("grid needs matching 1-D node and weight arrays")
        if not x[0] > 0 or np.any(np.diff(x) <= 0):
            raise DomainError("grid nodes must be positive and strictly increasing")
        if np.any(w <= 0):
            raise DomainError("quadrature weights must be positive")
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_nodes(cls, nodes) -> "SizeGrid":
        x = np.array(nodes, dtype=float)
        return cls(x, trapezoid_weights(x))

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def x_min(self) -> float:
        return float(self.nodes[0])

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> np.ndarray:
        """Upwind cell widths ``x_i - x_{i-1}``, with a virtual node at 0."""
        return np.diff(self.nodes, prepend=0.0)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def scaled(self, factor: float) -> "SizeGrid":
        """The same grid with every node multiplied by ``factor``."""
        return SizeGrid(self.nodes * factor, self.weights * factor)

    def metadata(self) -> dict:
        return {"n": self.n, "x_min": self.x_min, "x_max": self.x_max}


def make_grid(x_min: float, x_max: float, n: int) -> SizeGrid:
    """Geometric grid of ``n`` nodes from ``x_min`` to ``x_max``."""
    if not (0 < x_min < x_max):
        raise DomainError(f"need 0 < x_min < x_max, got x_min={x_min}, x_max={x_max}")
    if int(n) != n or n < 32:
        raise DomainError(f"need an integer n >= 32, got {n}")
    return SizeGrid.from_nodes(np.geomspace(x_min, x_max, int(n)))


def uniform_grid(x_min: float, x_max: float, n: int) -> SizeGrid:
    """Equally spaced grid; the natural choice for explicit time stepping."""
    if not (0 < x_min < x_max):
        raise DomainError(f"need 0 < x_min < x_max, got x_min={x_min}, x_max={x_max}")
    if int(n) != n or n < 32:
        raise DomainError(f"need an integer n >= 32, got {n}")
    return SizeGrid.from_nodes(np.linspace(x_min, x_max, int(n)))
