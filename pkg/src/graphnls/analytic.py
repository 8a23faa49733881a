"""Closed-form theory of solitons and stationary states on the star graph.

Everything here reduces to the one-parameter family of integrals

    B(p, b) = integral_b^1 (1 - t^2)^p dt,      p > -1,  -1 <= b <= 1,

evaluated by fixed-order Gauss-Jacobi quadrature that absorbs the (1 - t)^p
endpoint factor into the weight.  Profile frequencies come either from the
exact formulas available at mu = 1 and mu = 2 or from bisection on the
strictly increasing mass functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .params import Grid, ProblemParams
from .graph import GraphFunction

_QUAD_NODES = 64


class InadmissibleMassError(ValueError):
    """Requested mass lies outside the range of the relevant mass function."""

    def __init__(self, message: str, bound: float):
        super().__init__(message)
        self.bound = bound


@dataclass(frozen=True)
class SolitonParams:
    """Soliton profile parameters: power mu, frequency omega, signed shift xi."""

    mu: float
    omega: float
    shift: float = 0.0

    def __post_init__(self):
        if self.omega <= 0.0:
            raise ValueError(f"omega must be positive, got {self.omega}")


@dataclass
class SpectrumEntry:
    """One stationary state at fixed mass: bump count j, omega_j, E_j."""

    bumps: int
    frequency: float | None
    energy: float | None
    min_mass: float
    admissible: bool


@lru_cache(maxsize=256)
def _jacobi_rule(p: float) -> tuple[np.ndarray, np.ndarray]:
    return roots_jacobi(_QUAD_NODES, p, 0.0)


def power_integral(p: float, b: float) -> float:
    """integral_b^1 (1 - t^2)^p dt for p > -1, |b| <= 1."""
    if p <= -1.0:
        raise ValueError(f"exponent must be > -1, got {p}")
    if not -1.0 <= b <= 1.0:
        raise ValueError(f"lower limit must be in [-1, 1], got {b}")
    if b == 1.0:
        return 0.0
    if b < 0.0:
        # integrand is even: split at 0 to keep the Jacobi weight on [b, 1]
        return 2.0 * power_integral(p, 0.0) - power_integral(p, -b)
    xs, ws = _jacobi_rule(p)
    half = 0.5 * (1.0 - b)
    t = half * xs + 0.5 * (1.0 + b)
    return float(half ** (p + 1.0) * np.sum(ws * (1.0 + t) ** p))


def beta_integral(mu: float, b: float) -> float:
    """integral_b^1 (1 - t^2)^(1/mu - 1) dt, the tail integral of the soliton mass."""
    if not 0.0 < mu <= 2.0:
        raise ValueError(f"mu must be in (0, 2], got {mu}")
    return power_integral(1.0 / mu - 1.0, b)


def _prefactor(mu: float) -> float:
    # (mu+1)^(1/mu) / mu, the amplitude constant shared by all mass formulas
    return (mu + 1.0) ** (1.0 / mu) / mu


def soliton(params: SolitonParams, x) -> np.ndarray | float:
    """phi_omega(x + shift) = [(mu+1) omega]^(1/(2 mu)) sech^(1/mu)(mu sqrt(omega) (x + shift))."""
    mu, om = params.mu, params.omega
    amp = ((mu + 1.0) * om) ** (1.0 / (2.0 * mu))
    arg = mu * math.sqrt(om) * (np.asarray(x, dtype=float) + params.shift)
    out = amp * np.cosh(arg) ** (-1.0 / mu)
    return float(out) if np.isscalar(x) else out


def soliton_tail_mass(mu: float, omega: float, shift: float) -> float:
    """integral_0^inf |phi_omega(x + shift)|^2 dx in closed form."""
    b = math.tanh(shift * mu * math.sqrt(omega))
    return _prefactor(mu) * omega ** (1.0 / mu - 0.5) * beta_integral(mu, b)


def soliton_tail_power(mu: float, omega: float, shift: float) -> float:
    """integral_0^inf |phi_omega(x + shift)|^(2 mu + 2) dx in closed form."""
    b = math.tanh(shift * mu * math.sqrt(omega))
    return ((mu + 1.0) ** (1.0 + 1.0 / mu) / mu) * omega ** (1.0 / mu + 0.5) \
        * power_integral(1.0 / mu, b)


def soliton_mass_line(mu: float, omega: float) -> float:
    """Mass of the full-line soliton, twice the half-line tail at zero shift."""
    return 2.0 * _prefactor(mu) * omega ** (1.0 / mu - 0.5) * beta_integral(mu, 0.0)


def soliton_energy_line(mu: float, omega: float) -> float:
    """Kirchhoff-free energy of the full-line soliton; negative for mu < 2."""
    return -_prefactor(mu) * (2.0 - mu) / (2.0 + mu) * omega ** (1.0 / mu + 0.5) \
        * beta_integral(mu, 0.0)


def soliton_frequency_line(mu: float, m: float) -> float:
    """The unique omega with soliton_mass_line(mu, omega) = m (mu = 2 excluded)."""
    if m <= 0.0:
        raise ValueError("mass must be positive")
    if mu == 2.0:
        raise ValueError("critical-mass-degenerate: at mu = 2 the line mass "
                         "is independent of omega")
    base = 2.0 * _prefactor(mu) * beta_integral(mu, 0.0)
    expo = 1.0 / mu - 0.5
    return float((m / base) ** (1.0 / expo))


def critical_mass(params: ProblemParams) -> float:
    """Threshold mass below which the constrained minimizer exists (alpha < 0)."""
    if params.alpha == 0.0:
        raise ValueError("no-threshold: the Kirchhoff case has no minimizer "
                         "at any mass")
    mu, N = params.mu, params.n_edges
    return 2.0 * _prefactor(mu) * (params.abs_alpha / N) ** ((2.0 - mu) / mu) \
        * beta_integral(mu, 0.0)


def critical_mass_range_sup(params: ProblemParams) -> float | None:
    """At mu = 2 the mass functions are bounded: sup Ran M_j = N pi sqrt(3) / 4."""
    if params.mu != 2.0:
        return None
    return params.n_edges * math.pi * math.sqrt(3.0) / 4.0


def _frequency_threshold(params: ProblemParams, j: int) -> float:
    return (params.abs_alpha / (params.n_edges - 2 * j)) ** 2


def _check_bumps(params: ProblemParams, j: int) -> None:
    if not 0 <= j <= params.max_bumps:
        raise ValueError(f"bump count must be in 0..{params.max_bumps}, got {j}")


def mass_function(params: ProblemParams, j: int, omega: float) -> float:
    """M_j(omega): mass of the j-bump stationary state at frequency omega.

    Defined for omega above the existence threshold alpha^2/(N-2j)^2; strictly
    increasing in omega.
    """
    _check_bumps(params, j)
    thr = _frequency_threshold(params, j)
    if omega <= thr or omega <= 0.0:
        raise ValueError(f"omega must exceed the existence threshold {thr:.6g}")
    mu, N = params.mu, params.n_edges
    b = params.abs_alpha / ((N - 2 * j) * math.sqrt(omega))
    eye = beta_integral(mu, 0.0)
    return _prefactor(mu) * omega ** (1.0 / mu - 0.5) \
        * ((N - 2 * j) * beta_integral(mu, b) + 2 * j * eye)


def min_mass(params: ProblemParams, j: int) -> float:
    """Infimum of Ran M_j; zero for the tail-only state j = 0."""
    _check_bumps(params, j)
    if j == 0:
        return 0.0
    mu, N = params.mu, params.n_edges
    return 2.0 * j * (params.abs_alpha / (N - 2 * j)) ** ((2.0 - mu) / mu) \
        * _prefactor(mu) * beta_integral(mu, 0.0)


def is_admissible(params: ProblemParams, j: int) -> bool:
    """Whether M_j(omega) = mass is solvable with omega strictly above threshold."""
    _check_bumps(params, j)
    if params.mass <= min_mass(params, j) and j > 0:
        return False
    if params.mu == 2.0:
        sup = critical_mass_range_sup(params)
        if params.mass >= sup:
            return False
    return True


def solve_frequency(params: ProblemParams, j: int, method: str = "auto") -> float:
    """omega_j with M_j(omega_j) = mass.

    method 'auto' dispatches the exact formulas at mu = 1 and mu = 2 and
    bisects otherwise; 'bisection' forces the generic path.  Bisection runs on
    the strictly monotone M_j to residual 1e-11 * mass.
    """
    _check_bumps(params, j)
    mu, N, m, aa = params.mu, params.n_edges, params.mass, params.abs_alpha
    lo_mass = min_mass(params, j)
    if j > 0 and m <= lo_mass:
        raise InadmissibleMassError(
            f"inadmissible-mass: m = {m:.6g} is not above the minimal mass "
            f"{lo_mass:.6g} of the {j}-bump family", lo_mass)
    if mu == 2.0:
        sup = critical_mass_range_sup(params)
        if m >= sup:
            raise InadmissibleMassError(
                f"inadmissible-mass: m = {m:.6g} reaches sup Ran M_j = {sup:.6g}",
                sup)

    if mu == 2.0 and aa == 0.0:
        raise InadmissibleMassError(
            "inadmissible-mass: at mu = 2 with alpha = 0 the mass function is "
            "degenerate in omega", critical_mass_range_sup(params))
    if method == "auto" and mu == 1.0:
        return (m + 2.0 * aa) ** 2 / (4.0 * N ** 2)
    if method == "auto" and mu == 2.0:
        y = (N * math.pi / 2.0 - 2.0 * m / math.sqrt(3.0)) / (N - 2 * j)
        return aa ** 2 / ((N - 2 * j) ** 2 * math.sin(y) ** 2)

    thr = _frequency_threshold(params, j)
    lo = thr * (1.0 + 1e-12) if thr > 0.0 else 1e-300
    if mass_function(params, j, lo) >= m:
        # already at the finite threshold value; only possible for j >= 1
        raise InadmissibleMassError(
            f"inadmissible-mass: m = {m:.6g} not reachable above threshold", lo_mass)
    hi = max(2.0 * thr, 1.0)
    while mass_function(params, j, hi) < m:
        hi *= 2.0
        if hi > 1e300:
            raise InadmissibleMassError(
                f"inadmissible-mass: m = {m:.6g} exceeds Ran M_{j}", hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = mass_function(params, j, mid)
        if abs(val - m) <= 1e-11 * m:
            return mid
        if val < m:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bump_shift(params: ProblemParams, j: int, omega: float) -> float:
    """a_j = arctanh(|alpha| / ((N - 2j) sqrt(omega))) / (mu sqrt(omega))."""
    arg = params.abs_alpha / ((params.n_edges - 2 * j) * math.sqrt(omega))
    return math.atanh(arg) / (params.mu * math.sqrt(omega))


def stationary_state(params: ProblemParams, j: int, grid: Grid,
                     method: str = "auto") -> GraphFunction:
    """Sample the j-bump stationary state at the frequency solving M_j = mass.

    Edges 1..j carry bumps phi(x - a_j), edges j+1..N carry tails
    phi(x + a_j); all edges share the vertex value phi(a_j) and the outer
    node is clamped to zero (the profile there is exponentially small).
    """
    omega = solve_frequency(params, j, method=method)
    a = bump_shift(params, j, omega)
    x = grid.nodes()
    tail = soliton(SolitonParams(params.mu, omega, a), x)
    vals = np.tile(tail, (params.n_edges, 1)).astype(complex)
    if j > 0:
        bump = soliton(SolitonParams(params.mu, omega, -a), x)
        vals[:j, :] = bump
    vals[:, -1] = 0.0
    return GraphFunction(grid, vals)


def stationary_energy(params: ProblemParams, j: int, method: str = "auto") -> float:
    """E[Psi_{omega_j, j}] in closed form; strictly negative for alpha < 0."""
    omega = solve_frequency(params, j, method=method)
    mu, m, aa = params.mu, params.mass, params.abs_alpha
    gap = omega - _frequency_threshold(params, j)
    return -(m * omega * (2.0 - mu)
             + aa * mu * (mu + 1.0) ** (1.0 / mu) * gap ** (1.0 / mu)) \
        / (2.0 * (mu + 2.0))


def spectrum(params: ProblemParams) -> list[SpectrumEntry]:
    """Admissibility, frequency and energy for every bump count 0..floor((N-1)/2)."""
    entries = []
    for j in range(params.max_bumps + 1):
        lo = min_mass(params, j)
        if is_admissible(params, j):
            try:
                om = solve_frequency(params, j)
                en = stationary_energy(params, j)
                entries.append(SpectrumEntry(j, om, en, lo, True))
            except (InadmissibleMassError, ValueError):
                entries.append(SpectrumEntry(j, None, None, lo, False))
        else:
            entries.append(SpectrumEntry(j, None, None, lo, False))
    return entries


def kirchhoff_lower_bound(params: ProblemParams) -> float:
    """Rearrangement bound for inf E^0 at fixed mass: the line-soliton energy.

    Equals -(1/2) (2-mu)/(2+mu) omega_R m with omega_R the line-soliton
    frequency at mass m.
    """
    if params.mu >= 2.0:
        raise ValueError("the lower bound requires mu < 2")
    om = soliton_frequency_line(params.mu, params.mass)
    return -0.5 * (2.0 - params.mu) / (2.0 + params.mu) * om * params.mass


def kirchhoff_frequency_ratio(params: ProblemParams) -> tuple[float, float]:
    """(omega_R / omega_tilde, (N/2)^(2 mu / (2 - mu))) for the scaling identity.

    omega_R is the line-soliton frequency at mass m; omega_tilde is the
    frequency of the half-line soliton holding mass m / N.
    """
    if params.mu >= 2.0:
        raise ValueError("the ratio requires mu < 2")
    om_r = soliton_frequency_line(params.mu, params.mass)
    om_t = soliton_frequency_line(params.mu, 2.0 * params.mass / params.n_edges)
    expected = (params.n_edges / 2.0) ** (2.0 * params.mu / (2.0 - params.mu))
    return om_r / om_t, expected


def certified_mass_regime(params: ProblemParams) -> bool:
    """Whether (mu, alpha, m) lies in the regime with a certified ground state."""
    if params.alpha == 0.0:
        return False
    mstar = critical_mass(params)
    if params.mu == 2.0:
        return params.mass < min(mstar, critical_mass_range_sup(params))
    return params.mass <= mstar
