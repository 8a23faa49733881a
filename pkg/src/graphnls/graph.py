"""Functions on the discretized star graph and their basic functionals.

A GraphFunction stores complex samples psi_j(x_k) for every edge j and grid
node x_k.  All edges share the sample at the vertex (node 0) and carry a
Dirichlet zero at the outer node K.  Integrals use the trapezoidal rule; the
kinetic quadratic form uses forward difference quotients, so that the energy
here and the discrete Hamiltonian in `dynamics` are exact companions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .params import Grid, GraphPoint

VERTEX_CONTINUITY_TOL = 1e-10


@dataclass
class GraphFunction:
    """Complex-valued function on the star graph.

    values has shape (n_edges, cells + 1); values[j, k] is the sample of
    psi_{j+1} at x_k (edges are 1-based in the external interfaces, 0-based
    in the array).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_nodes:
            raise ValueError(
                f"values must have shape (n_edges, {self.grid.n_nodes}), got {self.values.shape}"
            )

    @property
    def n_edges(self) -> int:
        return self.values.shape[0]

    @property
    def vertex_value(self) -> complex:
        return complex(self.values[0, 0])

    def copy(self) -> "GraphFunction":
        return GraphFunction(self.grid, self.values.copy())

    def validate(self) -> None:
        """Check vertex continuity and the outer Dirichlet zero."""
        v = self.values[:, 0]
        if np.max(np.abs(v - v[0])) > VERTEX_CONTINUITY_TOL * max(1.0, np.max(np.abs(v))):
            raise ValueError("vertex continuity violated: edge samples at x=0 differ")
        if np.max(np.abs(self.values[:, -1])) > 0.0:
            raise ValueError("outer boundary condition violated: values at x=L must be 0")


def zero_function(grid: Grid, n_edges: int) -> GraphFunction:
    return GraphFunction(grid, np.zeros((n_edges, grid.n_nodes), dtype=complex))


def _trapezoid_weights(n_nodes: int) -> np.ndarray:
    w = np.ones(n_nodes)
    w[0] = 0.5
    w[-1] = 0.5
    return w


def l2_inner(f: GraphFunction, g: GraphFunction) -> complex:
    """Discrete L^2 product <f, g> (conjugate-linear in f), vertex counted once."""
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    h = f.grid.spacing
    w = _trapezoid_weights(f.grid.n_nodes)
    return complex(h * np.sum(w * np.conj(f.values) * g.values))


def kinetic_form(f: GraphFunction) -> float:
    """Sum over edges of sum_k |f(x_{k+1}) - f(x_k)|^2 / h (the Dirichlet form)."""
    h = f.grid.spacing
    d = np.diff(f.values, axis=1)
    return float(np.sum(np.abs(d) ** 2) / h)


def h1_inner(f: GraphFunction, g: GraphFunction) -> complex:
    """L^2 product plus the difference-quotient product (no vertex term)."""
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    h = f.grid.spacing
    df = np.diff(f.values, axis=1)
    dg = np.diff(g.values, axis=1)
    return l2_inner(f, g) + complex(np.sum(np.conj(df) * dg) / h)


def h1_norm(f: GraphFunction) -> float:
    return float(np.sqrt(max(h1_inner(f, f).real, 0.0)))


def mass(psi: GraphFunction) -> float:
    """M[psi] = ||psi||^2 by trapezoidal quadrature."""
    return l2_inner(psi, psi).real


def lp_norm(psi: GraphFunction, p: float) -> float:
    """Trapezoidal p-norm over the graph; p = inf gives the max of |psi|."""
    if p == np.inf:
        return float(np.max(np.abs(psi.values)))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    h = psi.grid.spacing
    w = _trapezoid_weights(psi.grid.n_nodes)
    total = h * np.sum(w * np.abs(psi.values) ** p)
    return float(total ** (1.0 / p))


def cell_norm(psi: GraphFunction, p: float) -> float:
    """p-norm over the interior cell multiset {|psi_j(x_k)| : k = 1..K}.

    The shared vertex sample is excluded; each of the N*K cell values carries
    the full weight h.  This is the quantity the symmetric rearrangement
    preserves exactly.
    """
    cells = np.abs(psi.values[:, 1:])
    if p == np.inf:
        return float(np.max(cells)) if cells.size else 0.0
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    h = psi.grid.spacing
    return float((h * np.sum(cells ** p)) ** (1.0 / p))


def energy(psi: GraphFunction, mu: float, alpha: float) -> float:
    """E[psi] = (1/2)||psi'||^2 - ||psi||_{2mu+2}^{2mu+2}/(2mu+2) + (alpha/2)|psi(0)|^2.

    The kinetic term is the forward-difference quadratic form, the nonlinear
    term is trapezoidal, and the vertex term uses the shared sample.  With
    alpha = 0 this is the Kirchhoff energy.
    """
    p = 2.0 * mu + 2.0
    nl = lp_norm(psi, p) ** p
    vertex = abs(psi.vertex_value) ** 2
    return 0.5 * kinetic_form(psi) - nl / p + 0.5 * alpha * vertex


def renormalize(psi: GraphFunction, target_mass: float) -> GraphFunction:
    """Rescale psi so that mass(psi) equals target_mass exactly."""
    m0 = mass(psi)
    if m0 <= 0.0:
        raise ValueError("cannot renormalize a zero function")
    return GraphFunction(psi.grid, psi.values * np.sqrt(target_mass / m0))


# ---------------------------------------------------------------------------
# balls and the concentration function
# ---------------------------------------------------------------------------

def _cumulative_density(psi: GraphFunction) -> np.ndarray:
    """Nodal antiderivatives F_j(x_k) of the piecewise-linear density |psi_j|^2.

    Treating |psi|^2 as piecewise linear between nodes makes every partial
    integral exact, consistent with the trapezoidal mass (F_j(L) sums to it).
    """
    h = psi.grid.spacing
    dens = np.abs(psi.values) ** 2
    segs = 0.5 * h * (dens[:, :-1] + dens[:, 1:])
    out = np.zeros_like(dens, dtype=float)
    np.cumsum(segs, axis=1, out=out[:, 1:])
    return out


def _eval_cumulative(cum: np.ndarray, dens: np.ndarray, h: float, x: np.ndarray) -> np.ndarray:
    """Evaluate the piecewise-quadratic antiderivatives at arbitrary points.

    cum, dens have shape (N, K+1); x is broadcast per edge with shape
    (N, ...) or (...,) applied to every edge.
    """
    K = cum.shape[1] - 1
    xc = np.clip(x, 0.0, K * h)
    k = np.minimum((xc / h).astype(int), K - 1)
    s = xc / h - k
    d0 = np.take_along_axis(dens, k, axis=-1) if x.ndim == dens.ndim else dens[:, k]
    d1 = np.take_along_axis(dens, k + 1, axis=-1) if x.ndim == dens.ndim else dens[:, k + 1]
    c0 = np.take_along_axis(cum, k, axis=-1) if x.ndim == dens.ndim else cum[:, k]
    return c0 + h * s * (d0 + 0.5 * s * (d1 - d0))


def ball_mass(psi: GraphFunction, center: GraphPoint, radius: float) -> float:
    """L^2 mass of psi restricted to the open ball B(center, radius).

    On the center's edge the ball is the interval (y - r, y + r) clipped to
    [0, L]; every other edge contributes its initial segment [0, r - y) when
    r > y.  Monotone nondecreasing in radius and equal to mass(psi) once the
    ball covers the graph.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if not 1 <= center.edge <= psi.n_edges:
        raise ValueError(f"center edge {center.edge} out of range")
    h = psi.grid.spacing
    cum = _cumulative_density(psi)
    dens = np.abs(psi.values) ** 2
    j = center.edge - 1
    y = center.coordinate
    own = (_eval_cumulative(cum, dens, h, np.array(min(y + radius, psi.grid.edge_length)))
           - _eval_cumulative(cum, dens, h, np.array(max(y - radius, 0.0))))
    total = float(own[j])
    reach = radius - y
    if reach > 0:
        others = _eval_cumulative(cum, dens, h, np.array(reach))
        total += float(np.sum(others)) - float(others[j])
    return total


def concentration(psi: GraphFunction, radius: float) -> tuple[float, GraphPoint]:
    """Largest ball mass over all grid-node centers, with the attaining center.

    Ties are broken toward the lowest edge index, then the lowest coordinate,
    so the result is deterministic.  Cost is O(N^2 K) via prefix sums.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    h = psi.grid.spacing
    L = psi.grid.edge_length
    nodes = psi.grid.nodes()
    cum = _cumulative_density(psi)
    dens = np.abs(psi.values) ** 2
    totals = cum[:, -1]

    best_val = -1.0
    best = GraphPoint(1, 0.0)
    lo = np.array([np.clip(nodes - radius, 0.0, L)])
    hi = np.array([np.clip(nodes + radius, 0.0, L)])
    reach = np.array([np.clip(radius - nodes, 0.0, L)])
    spill_all = np.zeros(nodes.shape[0])
    per_edge_spill = []
    for i in range(psi.n_edges):
        s = _eval_cumulative(cum[i:i + 1], dens[i:i + 1], h, reach)[0]
        per_edge_spill.append(s)
        spill_all += s
    for j in range(psi.n_edges):
        cj = cum[j:j + 1]
        dj = dens[j:j + 1]
        own = (_eval_cumulative(cj, dj, h, hi) - _eval_cumulative(cj, dj, h, lo))[0]
        vals = own + spill_all - per_edge_spill[j]
        k = int(np.argmax(vals))  # first max -> lowest coordinate on this edge
        if vals[k] > best_val:
            best_val = float(vals[k])
            best = GraphPoint(j + 1, float(nodes[k]))
    return best_val, best


# ---------------------------------------------------------------------------
# symmetric rearrangement
# ---------------------------------------------------------------------------

def rearrange(psi: GraphFunction) -> GraphFunction:
    """Discrete symmetric rearrangement of |psi| onto the star.

    The N*K interior cell magnitudes (k = 1..K; the shared vertex sample is
    counted once and excluded from the multiset) are sorted nonincreasingly
    into S, and edge j, cell k receives S[N*(k-1) + (j-1)].  The output is
    real, nonnegative, nonincreasing along every edge, shares the top value
    S[0] at the vertex, and preserves the interior cell multiset exactly, so
    every cell-level p-norm of |psi| is preserved to rounding.
    """
    N = psi.n_edges
    K = psi.grid.cells
    mags = np.abs(psi.values[:, 1:]).ravel()
    order = np.sort(mags)[::-1]
    out = np.zeros((N, K + 1), dtype=complex)
    out[:, 1:] = order.reshape(K, N).T
    out[:, 0] = order[0] if order.size else 0.0
    return GraphFunction(psi.grid, out)


# ---------------------------------------------------------------------------
# seed profiles
# ---------------------------------------------------------------------------

def _wall_taper(x: np.ndarray, L: float, width: float = 2.0) -> np.ndarray:
    # smooth decay to zero at the truncation boundary so seeds respect the
    # Dirichlet node without a kinetic-energy spike
    return np.tanh((L - x) / width)


def vertex_gaussian(grid: Grid, n_edges: int, width: float = 1.0) -> GraphFunction:
    """Gaussian hump centered at the vertex, identical on every edge."""
    x = grid.nodes()
    prof = np.exp(-x ** 2 / (2.0 * width ** 2)) * _wall_taper(x, grid.edge_length)
    vals = np.tile(prof, (n_edges, 1)).astype(complex)
    vals[:, -1] = 0.0
    return GraphFunction(grid, vals)


def edge_bump(grid: Grid, n_edges: int, edge: int, center: float, width: float) -> GraphFunction:
    """Gaussian bump supported on a single edge, vanishing at both ends."""
    if not 1 <= edge <= n_edges:
        raise ValueError(f"edge {edge} out of range 1..{n_edges}")
    x = grid.nodes()
    prof = np.exp(-(x - center) ** 2 / (2.0 * width ** 2))
    prof *= np.tanh(x / max(width, 1.0)) * _wall_taper(x, grid.edge_length)
    vals = np.zeros((n_edges, grid.n_nodes), dtype=complex)
    vals[edge - 1] = prof
    vals[:, 0] = prof[0]
    vals[:, -1] = 0.0
    return GraphFunction(grid, vals)


def flat_profile(grid: Grid, n_edges: int) -> GraphFunction:
    """Nearly flat profile, smoothly decaying to zero at the outer boundary."""
    x = grid.nodes()
    prof = 1.0 - (x / grid.edge_length) ** 4
    vals = np.tile(prof, (n_edges, 1)).astype(complex)
    vals[:, -1] = 0.0
    return GraphFunction(grid, vals)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

CSV_HEADER = ["edge", "k", "x", "re", "im"]


def write_csv(psi: GraphFunction, path) -> None:
    """Write `edge,k,x,re,im` rows at 17 significant digits (round-trip exact)."""
    h = psi.grid.spacing
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for j in range(psi.n_edges):
            for k in range(psi.grid.n_nodes):
                z = psi.values[j, k]
                writer.writerow([j + 1, k, f"{k * h:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}"])


def read_csv(path) -> GraphFunction:
    edges: dict[int, dict[int, complex]] = {}
    xs: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        for row in reader:
            j, k = int(row[0]), int(row[1])
            edges.setdefault(j, {})[k] = complex(float(row[3]), float(row[4]))
            xs[k] = float(row[2])
    n_edges = max(edges)
    K = max(xs)
    grid = Grid(edge_length=xs[K], cells=K)
    vals = np.zeros((n_edges, K + 1), dtype=complex)
    for j in range(1, n_edges + 1):
        for k, z in edges[j].items():
            vals[j - 1, k] = z
    return GraphFunction(grid, vals)
