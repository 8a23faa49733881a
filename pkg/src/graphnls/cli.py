"""Command-line front end: reproducible experiments with CSV/JSON artifacts.

Every command resolves its configuration in three layers (defaults, then a
flat key=value config file, then explicit flags), writes `manifest.json`
before any result file, and emits floating-point output at 17 significant
digits so artifacts round-trip bit-faithfully.  Exit codes: 0 success,
1 usage error, 2 inadmissible parameters, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import __version__
from .params import Grid, ProblemParams
from .graph import (
    GraphFunction,
    cell_norm,
    edge_bump,
    flat_profile,
    kinetic_form,
    mass,
    read_csv,
    rearrange,
    renormalize,
    vertex_gaussian,
    write_csv,
)
from .analytic import (
    InadmissibleMassError,
    critical_mass,
    critical_mass_range_sup,
    solve_frequency,
    spectrum,
    stationary_state,
)
from .dynamics import EvolveConfig, EvolveError, evolve, stability_experiment
from .minimizer import (
    CONVERGENT,
    FlowConfig,
    FlowError,
    compare_to_ntail,
    minimize,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_NUMERICAL = 3

DEFAULTS: dict[str, object] = {
    "mu": 1.0,
    "alpha": -1.0,
    "n_edges": 3,
    "mass": 1.0,
    "edge_length": 40.0,
    "cells": 4000,
    "rng_seed": 0,
    "seed": "vertex_gaussian:1.0",
    "state": "analytic:0",
    "tau": 0.5,
    "max_iters": 20000,
    "tol_energy": 1e-10,
    "tol_residual": 1e-8,
    "snapshot_every": 25,
    "dt": 1e-3,
    "t_final": 10.0,
    "diagnostics_every": 100,
    "delta": 0.01,
    "seed_noise": 0.0,
}

_FLOAT_KEYS = {"mu", "alpha", "mass", "edge_length", "tau", "tol_energy",
               "tol_residual", "dt", "t_final", "delta", "seed_noise"}
_INT_KEYS = {"n_edges", "cells", "rng_seed", "max_iters", "snapshot_every",
             "diagnostics_every"}


def fmt(x: float) -> str:
    return f"{x:.17g}"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _coerce(key: str, raw: str):
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _INT_KEYS:
        return int(raw)
    return raw


def _read_config_file(path: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = _coerce(key, raw.strip())
    return out


def resolve_config(args: argparse.Namespace) -> dict[str, object]:
    """Layer resolution: defaults, then config file, then explicit CLI flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_read_config_file(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _out_dir(args: argparse.Namespace, command: str) -> Path:
    out = getattr(args, "out", None) or os.environ.get("GRAPHNLS_OUT") \
        or f"graphnls_out_{command}"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, command: str, cfg: dict[str, object]) -> None:
    _write_json(out / "manifest.json", {
        "command": command,
        "toolkit_version": __version__,
        "config": {k: (fmt(v) if isinstance(v, float) else v) for k, v in cfg.items()},
    })


def _params_grid(cfg) -> tuple[ProblemParams, Grid]:
    params = ProblemParams(n_edges=int(cfg["n_edges"]), mu=float(cfg["mu"]),
                           alpha=float(cfg["alpha"]), mass=float(cfg["mass"]))
    grid = Grid(edge_length=float(cfg["edge_length"]), cells=int(cfg["cells"]))
    return params, grid


def _smooth_noise(grid: Grid, n_edges: int, amplitude: float, rng_seed: int
                  ) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    x = grid.nodes()
    vals = np.zeros((n_edges, grid.n_nodes))
    for j in range(n_edges):
        for _ in range(4):
            a = rng.standard_normal()
            c = rng.uniform(0.0, grid.edge_length)
            w = rng.uniform(1.0, 5.0)
            vals[j] += a * np.exp(-(x - c) ** 2 / (2.0 * w ** 2))
    vals *= amplitude
    vals[:, 0] = vals[0, 0]
    vals[:, -1] = 0.0
    return vals


def build_state(spec: str, params: ProblemParams, grid: Grid,
                noise: float = 0.0, rng_seed: int = 0) -> GraphFunction:
    """Construct a state from a seed spec string.

    Forms: vertex_gaussian:W | edge_bump:J,CENTER,W | analytic:J | flat |
    file:PATH.  Noise (if requested) adds rng-seeded smooth bumps before the
    final mass normalization done by the caller.
    """
    kind, _, rest = spec.partition(":")
    if kind == "vertex_gaussian":
        psi = vertex_gaussian(grid, params.n_edges, width=float(rest or 1.0))
    elif kind == "edge_bump":
        parts = [p for p in rest.split(",") if p]
        if len(parts) != 3:
            raise ValueError(f"edge_bump spec needs EDGE,CENTER,WIDTH, got {rest!r}")
        psi = edge_bump(grid, params.n_edges, edge=int(parts[0]),
                        center=float(parts[1]), width=float(parts[2]))
    elif kind == "flat":
        psi = flat_profile(grid, params.n_edges)
    elif kind == "analytic":
        psi = stationary_state(params, int(rest or 0), grid)
    elif kind == "file":
        psi = read_csv(rest)
    else:
        raise ValueError(f"unknown seed spec {spec!r}")
    if noise > 0.0:
        psi = GraphFunction(grid, psi.values
                            + _smooth_noise(grid, params.n_edges, noise, rng_seed))
    return psi


def _flow_config(cfg) -> FlowConfig:
    return FlowConfig(step=float(cfg["tau"]), max_iters=int(cfg["max_iters"]),
                      tol_energy=float(cfg["tol_energy"]),
                      tol_residual=float(cfg["tol_residual"]),
                      snapshot_every=int(cfg["snapshot_every"]))


def _spectrum_payload(params: ProblemParams) -> dict:
    entries = spectrum(params)
    try:
        mstar = critical_mass(params)
    except ValueError:
        mstar = None
    rows = []
    for e in entries:
        rows.append({
            "j": e.bumps,
            "omega": e.frequency,
            "energy": e.energy,
            "min_mass": e.min_mass,
            "admissible": e.admissible,
        })
    omegas = [e.frequency for e in entries if e.admissible]
    energies = [e.energy for e in entries if e.admissible]
    verdicts = {}
    if len(omegas) >= 2:
        d = np.diff(omegas)
        verdicts["frequency_ordering"] = (
            "increasing" if np.all(d > 0) else
            "decreasing" if np.all(d < 0) else
            "constant" if np.allclose(d, 0.0, atol=1e-12) else "mixed")
        verdicts["energy_increasing"] = bool(np.all(np.diff(energies) > 0))
    return {
        "params": {"n_edges": params.n_edges, "mu": params.mu,
                   "alpha": params.alpha, "mass": params.mass},
        "m_star": mstar,
        "mass_range_sup": critical_mass_range_sup(params),
        "entries": rows,
        "ordering": verdicts,
    }


def cmd_spectrum(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    params, _ = _params_grid(cfg)
    out = _out_dir(args, "spectrum")
    _write_manifest(out, "spectrum", cfg)
    if params.mu == 2.0:
        sup = critical_mass_range_sup(params)
        if params.mass >= sup:
            raise InadmissibleMassError(
                f"inadmissible-mass: m = {params.mass:.6g} exceeds sup Ran M_j "
                f"= {sup:.6g}", sup)
    payload = _spectrum_payload(params)
    with open(out / "spectrum.csv", "w") as fh:
        fh.write("j,omega,energy,min_mass,admissible\n")
        for row in payload["entries"]:
            om = fmt(row["omega"]) if row["omega"] is not None else "nan"
            en = fmt(row["energy"]) if row["energy"] is not None else "nan"
            fh.write(f"{row['j']},{om},{en},{fmt(row['min_mass'])},"
                     f"{str(row['admissible']).lower()}\n")
    payload["status"] = "ok"
    _write_json(out / "spectrum.json", payload)
    print(json.dumps({"m_star": payload["m_star"],
                      "admissible": sum(r["admissible"] for r in payload["entries"])},
                     sort_keys=True))
    return EXIT_OK


def _write_trail_csv(path: Path, trail, n_edges: int) -> None:
    cols = ["iter", "energy", "vertex_abs", "rho_probe"]
    cols += [f"edge_mass_{j + 1}" for j in range(n_edges)]
    cols += ["boundary_frac"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for s in trail:
            row = [str(s.iteration), fmt(s.energy), fmt(s.vertex_abs), fmt(s.rho_value)]
            row += [fmt(v) for v in s.edge_mass_frac]
            row += [fmt(s.boundary_frac)]
            fh.write(",".join(row) + "\n")


def cmd_groundstate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    params, grid = _params_grid(cfg)
    out = _out_dir(args, "groundstate")
    _write_manifest(out, "groundstate", cfg)
    seed = build_state(str(cfg["seed"]), params, grid,
                       noise=float(cfg["seed_noise"]), rng_seed=int(cfg["rng_seed"]))
    result = minimize(params, grid, _flow_config(cfg), seed)
    _write_trail_csv(out / "trail.csv", result.trail, params.n_edges)
    write_csv(result.state, out / "state.csv")
    gap = None
    if result.classification.kind == CONVERGENT and params.alpha < 0.0:
        gap, _ = compare_to_ntail(result, params, grid)
    summary = {
        "classification": str(result.classification),
        "energy": result.energy,
        "omega_recovered": result.omega,
        "l2_gap_to_ntail": gap,
        "iterations": result.iterations,
        "residual": result.residual,
        "flow_status": result.status,
        "status": "ok",
    }
    _write_json(out / "groundstate.json", summary)
    print(json.dumps({"classification": summary["classification"],
                      "energy": summary["energy"]}, sort_keys=True))
    return EXIT_OK


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    params, grid = _params_grid(cfg)
    out = _out_dir(args, "evolve")
    _write_manifest(out, "evolve", cfg)
    psi0 = build_state(str(cfg["state"]), params, grid,
                       noise=float(cfg["seed_noise"]), rng_seed=int(cfg["rng_seed"]))
    config = EvolveConfig(dt=float(cfg["dt"]), t_final=float(cfg["t_final"]),
                          diagnostics_every=int(cfg["diagnostics_every"]))
    write_csv(psi0, out / "initial_state.csv")
    final, diag = evolve(psi0, params, config)
    write_csv(final, out / "final_state.csv")
    with open(out / "dynamics.csv", "w") as fh:
        cols = ["t", "mass", "energy", "vertex_abs", "orbdist"]
        cols += [f"edge_mass_{j + 1}" for j in range(params.n_edges)]
        fh.write(",".join(cols) + "\n")
        for r in diag.records:
            row = [fmt(r.t), fmt(r.mass), fmt(r.energy), fmt(r.vertex_abs),
                   fmt(r.orbital_distance)]
            row += [fmt(v) for v in r.edge_masses]
            fh.write(",".join(row) + "\n")
    rec = diag.records
    summary = {
        "mass_drift": max(abs(r.mass - rec[0].mass) for r in rec) / rec[0].mass,
        "energy_drift": max(abs(r.energy - rec[0].energy) for r in rec),
        "max_orbital_distance": max(r.orbital_distance for r in rec),
        "evolve_status": diag.status,
        "status": "ok",
    }
    _write_json(out / "evolve.json", summary)
    print(json.dumps({"mass_drift": summary["mass_drift"],
                      "energy_drift": summary["energy_drift"]}, sort_keys=True))
    return EXIT_OK


def cmd_stability(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    params, grid = _params_grid(cfg)
    out = _out_dir(args, "stability")
    _write_manifest(out, "stability", cfg)
    report = stability_experiment(params, grid, delta=float(cfg["delta"]),
                                  t_final=float(cfg["t_final"]),
                                  dt=float(cfg["dt"]),
                                  diagnostics_every=int(cfg["diagnostics_every"]))
    with open(out / "stability.csv", "w") as fh:
        fh.write("t,orbdist\n")
        for t, d in zip(report.times, report.distances):
            fh.write(f"{fmt(t)},{fmt(d)}\n")
    summary = {
        "delta": report.delta,
        "sup_distance": report.sup_distance,
        "ratio": report.ratio,
        "first_quarter_mean": report.first_quarter_mean,
        "last_quarter_mean": report.last_quarter_mean,
        "non_trending": report.non_trending,
        "evolve_status": report.status,
        "status": "ok",
    }
    _write_json(out / "stability.json", summary)
    print(json.dumps({"sup_distance": report.sup_distance,
                      "ratio": report.ratio}, sort_keys=True))
    return EXIT_OK


def cmd_rearrange(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    params, grid = _params_grid(cfg)
    out = _out_dir(args, "rearrange")
    _write_manifest(out, "rearrange", cfg)
    psi = build_state(str(cfg["state"]), params, grid,
                      noise=float(cfg["seed_noise"]), rng_seed=int(cfg["rng_seed"]))
    star = rearrange(psi)
    write_csv(psi, out / "input_state.csv")
    write_csv(star, out / "rearranged_state.csv")
    kin_in = kinetic_form(psi)
    kin_out = kinetic_form(star)
    summary = {
        "cell_l2_in": cell_norm(psi, 2), "cell_l2_out": cell_norm(star, 2),
        "cell_l4_in": cell_norm(psi, 4), "cell_l4_out": cell_norm(star, 4),
        "kinetic_ratio": math.sqrt(kin_out / kin_in) if kin_in > 0 else None,
        "kinetic_bound": params.n_edges / 2.0,
        "status": "ok",
    }
    _write_json(out / "rearrange.json", summary)
    print(json.dumps({"kinetic_ratio": summary["kinetic_ratio"]}, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "groundstate": cmd_groundstate,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "rearrange": cmd_rearrange,
}


def _sweep_worker(job: tuple[str, list[str]]) -> tuple[str, int]:
    command, argv = job
    code = main(argv)
    return command, code


def cmd_sweep(args: argparse.Namespace) -> int:
    values = [v for v in args.sweep_values.split(",") if v]
    if args.sweep_param not in DEFAULTS:
        raise ValueError(f"unknown sweep parameter {args.sweep_param!r}")
    if args.command not in COMMANDS:
        raise ValueError(f"unknown sweep command {args.command!r}")
    out = _out_dir(args, "sweep")
    cfg = resolve_config(args)
    _write_manifest(out, "sweep", cfg)
    jobs = []
    passthrough = list(args.passthrough or [])
    for v in values:
        sub_out = out / f"sweep_{args.sweep_param}_{v}"
        argv = [args.command, f"--{args.sweep_param.replace('_', '-')}", v,
                "--out", str(sub_out)] + passthrough
        jobs.append((args.command, argv))
    workers = min(len(jobs), args.workers)
    if workers > 1:
        with Pool(processes=workers) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(j) for j in jobs]
    payload = {
        "param": args.sweep_param,
        "values": values,
        "exit_codes": [code for _, code in results],
        "status": "ok" if all(code == EXIT_OK for _, code in results) else "partial",
    }
    _write_json(out / "sweep.json", payload)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK if payload["status"] == "ok" else EXIT_NUMERICAL


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mu", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--n-edges", dest="n_edges", type=int)
    parser.add_argument("--mass", type=float)
    parser.add_argument("--edge-length", dest="edge_length", type=float)
    parser.add_argument("--cells", type=int)
    parser.add_argument("--out")
    parser.add_argument("--config")
    parser.add_argument("--rng-seed", dest="rng_seed", type=int)
    parser.add_argument("--seed-noise", dest="seed_noise", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphnls",
                     description="Focusing NLS on a star graph with an "
                                 "attractive delta vertex")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="stationary-state frequencies and energies")
    _add_common(sp)

    gs = sub.add_parser("groundstate", help="constrained gradient-flow minimization")
    _add_common(gs)
    gs.add_argument("--seed")
    gs.add_argument("--tau", type=float)
    gs.add_argument("--max-iters", dest="max_iters", type=int)
    gs.add_argument("--tol-energy", dest="tol_energy", type=float)
    gs.add_argument("--tol-residual", dest="tol_residual", type=float)
    gs.add_argument("--snapshot-every", dest="snapshot_every", type=int)

    ev = sub.add_parser("evolve", help="unitary time evolution")
    _add_common(ev)
    ev.add_argument("--state")
    ev.add_argument("--dt", type=float)
    ev.add_argument("--t-final", dest="t_final", type=float)
    ev.add_argument("--diagnostics-every", dest="diagnostics_every", type=int)

    st = sub.add_parser("stability", help="orbital stability experiment")
    _add_common(st)
    st.add_argument("--delta", type=float)
    st.add_argument("--dt", type=float)
    st.add_argument("--t-final", dest="t_final", type=float)
    st.add_argument("--diagnostics-every", dest="diagnostics_every", type=int)

    re = sub.add_parser("rearrange", help="symmetric rearrangement of a state")
    _add_common(re)
    re.add_argument("--state")

    sw = sub.add_parser("sweep", help="fan a command over one parameter axis")
    _add_common(sw)
    sw.add_argument("command", choices=sorted(COMMANDS))
    sw.add_argument("--sweep-param", dest="sweep_param", required=True)
    sw.add_argument("--sweep-values", dest="sweep_values", required=True)
    sw.add_argument("--workers", type=int, default=2)
    sw.add_argument("passthrough", nargs="*", default=[])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "sweep":
            return cmd_sweep(args)
        return COMMANDS[args.command](args)
    except InadmissibleMassError as exc:
        print(json.dumps({"error": "inadmissible-mass", "message": str(exc),
                          "bound": exc.bound}, sort_keys=True))
        return EXIT_INADMISSIBLE
    except (ValueError,) as exc:
        print(json.dumps({"error": "invalid-parameters", "message": str(exc)},
                         sort_keys=True))
        return EXIT_INADMISSIBLE
    except (FlowError, EvolveError) as exc:
        print(json.dumps({"error": "numerical-failure", "message": str(exc)},
                         sort_keys=True))
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
