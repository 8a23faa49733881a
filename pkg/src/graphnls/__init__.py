"""Focusing NLS on a star graph with an attractive delta vertex.

Numerical toolkit for the stationary-state theory, constrained energy
minimization, and unitary time dynamics of

    i d/dt Psi = H Psi - |Psi|^(2 mu) Psi

on N half-lines glued at a single vertex carrying a delta coupling of
strength alpha <= 0.
"""

__version__ = "0.1.0"

from .params import Grid, GraphPoint, ProblemParams, graph_distance
from .graph import (
    GraphFunction,
    ball_mass,
    cell_norm,
    concentration,
    edge_bump,
    energy,
    flat_profile,
    lp_norm,
    mass,
    read_csv,
    rearrange,
    renormalize,
    vertex_gaussian,
    write_csv,
    zero_function,
)
from .analytic import (
    InadmissibleMassError,
    SolitonParams,
    SpectrumEntry,
    beta_integral,
    critical_mass,
    critical_mass_range_sup,
    certified_mass_regime,
    kirchhoff_frequency_ratio,
    kirchhoff_lower_bound,
    mass_function,
    min_mass,
    power_integral,
    soliton,
    soliton_energy_line,
    soliton_frequency_line,
    soliton_mass_line,
    solve_frequency,
    spectrum,
    stationary_energy,
    stationary_state,
)
from .dynamics import (
    DiscreteHamiltonian,
    EvolveConfig,
    EvolveError,
    build_hamiltonian,
    evolve,
    orbital_distance,
    stability_experiment,
)
from .minimizer import (
    Classification,
    FlowConfig,
    FlowError,
    FlowResult,
    classify,
    compare_to_ntail,
    energy_gradient,
    minimize,
)
