"""Problem parameters and discretization for the star-graph NLS.

The physical setup is N half-lines glued at one vertex, a focusing power
nonlinearity |psi|^(2*mu)*psi with 0 < mu <= 2, a delta coupling of strength
alpha <= 0 at the vertex (alpha = 0 is the Kirchhoff / free case), and a
target L^2 mass m.  Each half-line is truncated at length L with a Dirichlet
zero at the outer end and discretized on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProblemParams:
    """Physical parameters (N, mu, alpha, m) with validity checks."""

    n_edges: int
    mu: float
    alpha: float
    mass: float

    def __post_init__(self):
        if self.n_edges < 2:
            raise ValueError(f"n_edges must be >= 2, got {self.n_edges}")
        if not 0.0 < self.mu <= 2.0:
            raise ValueError(f"mu must be in (0, 2], got {self.mu}")
        if self.alpha > 0.0:
            raise ValueError(f"alpha must be <= 0 (attractive or Kirchhoff), got {self.alpha}")
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @property
    def abs_alpha(self) -> float:
        return abs(self.alpha)

    @property
    def max_bumps(self) -> int:
        """Largest admissible bump count, floor((N-1)/2)."""
        return (self.n_edges - 1) // 2


@dataclass(frozen=True)
class Grid:
    """Uniform grid on one edge: nodes x_k = k*h, k = 0..cells, h = L/cells."""

    edge_length: float
    cells: int

    def __post_init__(self):
        if self.edge_length <= 0.0:
            raise ValueError(f"edge_length must be positive, got {self.edge_length}")
        if self.cells < 2:
            raise ValueError(f"cells must be >= 2, got {self.cells}")

    @property
    def spacing(self) -> float:
        return self.edge_length / self.cells

    @property
    def n_nodes(self) -> int:
        return self.cells + 1

    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.spacing


@dataclass(frozen=True)
class GraphPoint:
    """A point (x, j) on edge j (1-based), coordinate x >= 0 from the vertex."""

    edge: int
    coordinate: float

    def __post_init__(self):
        if self.edge < 1:
            raise ValueError(f"edge index is 1-based, got {self.edge}")
        if self.coordinate < 0.0:
            raise ValueError(f"coordinate must be >= 0, got {self.coordinate}")

    def is_vertex(self) -> bool:
        return self.coordinate == 0.0


def graph_distance(a: GraphPoint, b: GraphPoint) -> float:
    """Path metric on the star: |x - y| on a common edge, x + y across the vertex."""
    if a.edge == b.edge:
        return abs(a.coordinate - b.coordinate)
    return a.coordinate + b.coordinate
