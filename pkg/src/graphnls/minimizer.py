"""Constrained energy minimization by a normalized semi-implicit gradient flow.

One step solves the linearly implicit system

    (I + tau H) Phi = psi + tau (|psi|^(2 mu) psi - omega_n psi),

with omega_n the Rayleigh multiplier <H psi - |psi|^(2 mu) psi, psi>/(-m),
then renormalizes Phi back to the mass shell.  Including the multiplier in
the explicit part makes every discrete stationary state an exact fixed point
of the iteration, so the Euler-Lagrange residual can be driven to the
stopping tolerance at a fixed pseudo-time step.

The minimizing trajectory is classified through the concentration function:
a converged run keeps (almost) all mass in a fixed ball at the vertex, a
runaway run sends it along a single edge with the vertex amplitude dying, a
vanishing trail flattens out.  The thresholds are finite-box heuristics and
can be overridden in FlowConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import Grid, GraphPoint, ProblemParams
from .graph import (
    GraphFunction,
    concentration,
    energy,
    l2_inner,
    mass,
    renormalize,
)
from .dynamics import build_hamiltonian


class FlowError(RuntimeError):
    pass


CONVERGENT = "convergent"
VANISHING = "vanishing"
RUNAWAY = "runaway"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class Classification:
    kind: str
    edge: int | None = None

    def __str__(self) -> str:
        if self.kind == RUNAWAY and self.edge is not None:
            return f"runaway({self.edge})"
        return self.kind


@dataclass
class FlowConfig:
    step: float = 0.5
    max_iters: int = 20000
    tol_energy: float = 1e-10
    tol_residual: float = 1e-8
    snapshot_every: int = 25
    max_halvings: int = 10
    probe_radius: float = 5.0
    conv_mass_frac: float = 0.99
    conv_state_tol: float = 1e-5
    runaway_tail_frac: float = 0.9
    runaway_vertex_factor: float = 1e-2
    runaway_settle_tol: float = 2e-4
    vanish_factor: float = 1e-3
    center_stop_frac: float = 0.8

    def __post_init__(self):
        if self.step <= 0 or self.tol_energy <= 0 or self.tol_residual <= 0:
            raise ValueError("step and tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class FlowSnapshot:
    iteration: int
    energy: float
    vertex_abs: float
    rho_value: float
    rho_center: GraphPoint
    edge_mass_frac: np.ndarray
    tail_mass_frac: np.ndarray
    boundary_frac: float
    sup_norm: float
    delta_prev: float
    residual: float


@dataclass
class FlowResult:
    state: GraphFunction
    energy: float
    iterations: int
    classification: Classification
    residual: float
    omega: float
    trail: list[FlowSnapshot]
    status: str


def energy_gradient(psi: GraphFunction, params: ProblemParams) -> GraphFunction:
    """L^2 gradient of the discrete energy: H psi - |psi|^(2 mu) psi.

    With the trapezoidal inner product the metric factors cancel, so the
    nonlinear part is exactly pointwise and stationary states solve
    grad E = -omega psi.
    """
    ham = build_hamiltonian(psi.grid, psi.n_edges, params.alpha)
    hp = ham.apply(psi)
    nl = np.abs(psi.values) ** (2.0 * params.mu) * psi.values
    nl[:, -1] = 0.0
    return GraphFunction(psi.grid, hp.values - nl)


def _multiplier_and_residual(psi: GraphFunction, params: ProblemParams,
                             grad: GraphFunction) -> tuple[float, float]:
    m = mass(psi)
    omega = -l2_inner(grad, psi).real / m
    res = GraphFunction(psi.grid, grad.values + omega * psi.values)
    return omega, math.sqrt(max(l2_inner(res, res).real, 0.0))


def _edge_mass_fractions(psi: GraphFunction) -> tuple[np.ndarray, np.ndarray, float]:
    h = psi.grid.spacing
    nodes = psi.grid.nodes()
    w = np.ones(psi.grid.n_nodes)
    w[0] = w[-1] = 0.5
    dens = w * np.abs(psi.values) ** 2
    total = h * float(np.sum(dens))
    per_edge = h * np.sum(dens, axis=1) / total
    tail = h * np.sum(dens[:, nodes > psi.grid.edge_length / 2.0], axis=1) / total
    boundary = h * float(np.sum(dens[:, nodes >= 0.95 * psi.grid.edge_length])) / total
    return per_edge, tail, boundary


def _snapshot(it: int, psi: GraphFunction, prev: GraphFunction | None,
              params: ProblemParams, config: FlowConfig,
              residual: float) -> FlowSnapshot:
    rho, center = concentration(psi, config.probe_radius)
    per_edge, tail, boundary = _edge_mass_fractions(psi)
    if prev is not None:
        diff = GraphFunction(psi.grid, psi.values - prev.values)
        delta = math.sqrt(max(l2_inner(diff, diff).real, 0.0))
    else:
        delta = math.inf
    return FlowSnapshot(
        iteration=it,
        energy=energy(psi, params.mu, params.alpha),
        vertex_abs=abs(psi.vertex_value),
        rho_value=rho,
        rho_center=center,
        edge_mass_frac=per_edge,
        tail_mass_frac=tail,
        boundary_frac=boundary,
        sup_norm=float(np.max(np.abs(psi.values))),
        delta_prev=delta,
        residual=residual,
    )


def classify(trail: list[FlowSnapshot], grid: Grid, params: ProblemParams,
             config: FlowConfig | None = None) -> Classification:
    """Decide convergent / runaway(j*) / vanishing / undetermined from a trail.

    Convergent: the probe ball holds >= conv_mass_frac of the mass, centered
    within the probe radius of the vertex, and successive snapshots agree in
    L^2.  Runaway: one edge holds > runaway_tail_frac of the mass beyond L/2
    while the vertex amplitude is below runaway_vertex_factor * sqrt(m / L).
    Vanishing: the sup norm falls below vanish_factor * sqrt(m / L) with no
    edge localization.
    """
    if len(trail) < 2:
        raise ValueError("classification needs at least two snapshots")
    cfg = config or FlowConfig()
    last = trail[-1]
    m = params.mass
    scale = math.sqrt(m / grid.edge_length)

    if (last.rho_value / m >= cfg.conv_mass_frac
            and last.rho_center.coordinate <= cfg.probe_radius
            and last.delta_prev <= cfg.conv_state_tol):
        return Classification(CONVERGENT)

    tail_edge = int(np.argmax(last.tail_mass_frac))
    if (last.tail_mass_frac[tail_edge] > cfg.runaway_tail_frac
            and last.vertex_abs < cfg.runaway_vertex_factor * scale):
        return Classification(RUNAWAY, edge=tail_edge + 1)

    if (last.sup_norm < cfg.vanish_factor * scale
            and np.max(last.edge_mass_frac) < cfg.runaway_tail_frac):
        return Classification(VANISHING)

    return Classification(UNDETERMINED)


def minimize(params: ProblemParams, grid: Grid, config: FlowConfig,
             initial: GraphFunction) -> FlowResult:
    """Flow the initial state to a constrained critical point and classify it.

    Energy is nonincreasing along the iteration up to tolerance; a rise
    beyond 10 * tol_energy triggers a step halving (at most max_halvings,
    then the run aborts with 'non-monotone-energy').  Runs that localize on
    one edge stop early, once the runaway signature holds and the energy has
    settled, or unconditionally when the localization center passes
    center_stop_frac * L; truncation corrupts the energy beyond that point.
    """
    if mass(initial) <= 0.0:
        raise FlowError("initial state must have positive mass")
    m = params.mass
    psi = renormalize(initial, m)
    ham = build_hamiltonian(grid, psi.n_edges, params.alpha)
    tau = config.step
    solver = ham.shifted_solver(tau)
    two_mu = 2.0 * params.mu

    trail: list[FlowSnapshot] = []
    prev_snap_state: GraphFunction | None = None
    prev_energy = energy(psi, params.mu, params.alpha)
    halvings = 0
    omega = 0.0
    residual = math.inf
    status = "max-iters"
    it = 0

    while it < config.max_iters:
        it += 1
        grad = energy_gradient(psi, params)
        omega = -l2_inner(grad, psi).real / m
        nl = np.abs(psi.values) ** two_mu * psi.values
        nl[:, -1] = 0.0
        rhs = GraphFunction(grid, psi.values + tau * (nl - omega * psi.values))
        candidate = renormalize(solver(rhs), m)
        cand_energy = energy(candidate, params.mu, params.alpha)
        if cand_energy > prev_energy + 10.0 * config.tol_energy * abs(prev_energy):
            halvings += 1
            if halvings > config.max_halvings:
                raise FlowError(
                    f"non-monotone-energy: energy rose from {prev_energy:.12g} to "
                    f"{cand_energy:.12g} after {config.max_halvings} step halvings")
            tau *= 0.5
            solver = ham.shifted_solver(tau)
            it -= 1
            continue
        psi = candidate
        prev_energy = cand_energy

        if it % config.snapshot_every == 0:
            grad = energy_gradient(psi, params)
            omega, residual = _multiplier_and_residual(psi, params, grad)
            snap = _snapshot(it, psi, prev_snap_state, params, config, residual)
            trail.append(snap)
            prev_snap_state = psi.copy()

            if len(trail) >= 2:
                e0, e1 = trail[-2].energy, trail[-1].energy
                rel_de = abs(e1 - e0) / max(abs(e1), 1e-300)
                if rel_de < config.tol_energy * config.snapshot_every \
                        and residual < config.tol_residual:
                    status = "converged-tolerances"
                    break
                interim = classify(trail, grid, params, config)
                if interim.kind == RUNAWAY:
                    if rel_de < config.runaway_settle_tol:
                        status = "runaway-settled"
                        break
                    if snap.rho_center.coordinate >= config.center_stop_frac \
                            * grid.edge_length:
                        status = "runaway-center-stop"
                        break

    if len(trail) < 2:
        grad = energy_gradient(psi, params)
        omega, residual = _multiplier_and_residual(psi, params, grad)
        trail.append(_snapshot(it, psi, prev_snap_state, params, config, residual))
        prev_snap_state = psi.copy()
        if len(trail) < 2:
            trail.append(_snapshot(it, psi, psi, params, config, residual))

    if status == "max-iters":
        classification = Classification(UNDETERMINED)
    else:
        classification = classify(trail, grid, params, config)
    return FlowResult(
        state=psi,
        energy=prev_energy,
        iterations=it,
        classification=classification,
        residual=residual,
        omega=omega,
        trail=trail,
        status=status,
    )


def compare_to_ntail(result: FlowResult, params: ProblemParams, grid: Grid
                     ) -> tuple[float, float]:
    """Phase-aligned L^2 gap to the tail-only stationary state, and energy gap.

    The optimal phase is the argument of the L^2 overlap; only meaningful for
    convergent results.
    """
    from .analytic import stationary_energy, stationary_state

    if result.classification.kind != CONVERGENT:
        raise FlowError("not-comparable: flow result is "
                        f"{result.classification}, not convergent")
    ref = stationary_state(params, 0, grid)
    ov = l2_inner(ref, result.state)
    theta = np.angle(ov) if ov != 0 else 0.0
    diff = GraphFunction(grid, result.state.values - np.exp(1j * theta) * ref.values)
    gap = math.sqrt(max(l2_inner(diff, diff).real, 0.0))
    energy_gap = result.energy - stationary_energy(params, 0)
    return gap, energy_gap


def default_seeds(params: ProblemParams, grid: Grid) -> dict[str, GraphFunction]:
    """The three stock seed families used by the convergence experiments."""
    from .graph import edge_bump, flat_profile, vertex_gaussian

    return {
        "vertex_gaussian": vertex_gaussian(grid, params.n_edges, width=1.0),
        "edge_bump": edge_bump(grid, params.n_edges, edge=1, center=10.0, width=2.0),
        "flat": flat_profile(grid, params.n_edges),
    }
