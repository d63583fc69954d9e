"""Batch command-line front end.

Four subcommands (spectrum, simulate, control, validate) driven by a flat
key-value config file; every run is a pure function of (config, seed), so
reruns emit byte-identical artifacts.  Exit codes: 0 success, 1 invariant
failure, 2 config error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import control as ctl
from . import fem_oracle, validate
from .config import RunConfig, default_config, load_config, with_overrides
from .errors import ConfigError, DynbcError
from .formats import write_csv, write_json
from .spde import (
    SimConfig,
    ensemble_stats,
    named_coefficients,
    simulate_path,
)
from .spectral import (
    BoundaryParams,
    basis_to_json,
    build_basis,
    dirichlet_gap,
    normalization_bound,
)

GRAM_TOL = 1e-6
ORACLE_REL_TOL = 1e-3


def _emit_error(message: str, code: int) -> int:
    record = json.dumps({"error": message, "exit_code": code}, sort_keys=True)
    sys.stderr.write(record + "\n")
    return code


def _build_setup(cfg: RunConfig):
    params = BoundaryParams(cfg.b0, cfg.b1)
    basis = build_basis(params, cfg.n_modes, cfg.panels, cfg.nodes_per_panel)
    coeffs = named_coefficients(
        cfg.coefficients,
        g_scale=cfg.g_scale,
        h0=cfg.h0,
        h1=cfg.h1,
        f_scale=cfg.f_scale,
    )
    sim = SimConfig(
        n_modes=cfg.n_modes,
        m_noise=cfg.m_noise,
        dt=cfg.dt,
        T=cfg.T,
        t0=cfg.t0,
        seed=cfg.seed,
    )
    return params, basis, coeffs, sim


def _initial_state(name: str, basis) -> np.ndarray:
    if name == "zero":
        return np.zeros(basis.n_modes)
    x = basis.quad.nodes
    if name == "one":
        u, v0, v1 = np.ones_like(x), 1.0, 1.0
    elif name == "parabola":
        u, v0, v1 = x * (1.0 - x), 0.0, 0.0
    else:
        raise ConfigError(f"unknown initial state {name!r}")
    return (
        basis.values.T @ (basis.quad.weights * u)
        + v0 * basis.trace0
        + v1 * basis.trace1
    )


def cmd_spectrum(cfg: RunConfig, out: str, threads: int) -> int:
    params = BoundaryParams(cfg.b0, cfg.b1)
    basis = build_basis(params, cfg.n_modes, cfg.panels, cfg.nodes_per_panel)
    op = fem_oracle.build(cfg.fd_n, params)
    fd_lams, _ = fem_oracle.eigensolve(op, basis.n_modes)
    rows, rel_errs = [], []
    for mode in basis.modes:
        _, lo, hi = dirichlet_gap(mode.lam)
        fd_lam = fd_lams[mode.j]
        rel = abs((mode.lam - fd_lam) / fd_lam)
        rel_errs.append(rel)
        rows.append(
            (
                mode.j,
                mode.lam,
                mode.B,
                mode.trace0,
                mode.trace1,
                lo,
                hi,
                fd_lam,
                rel,
            )
        )
    write_csv(
        os.path.join(out, "spectrum.csv"),
        [
            "j",
            "lambda",
            "B",
            "trace0",
            "trace1",
            "bracket_lo",
            "bracket_hi",
            "fd_lambda",
            "rel_err",
        ],
        rows,
    )
    gram_dev = float(np.abs(basis.gram_matrix() - np.eye(basis.n_modes)).max())
    in_gap = all(lo < lam < hi for (_, lam, _, _, _, lo, hi, _, _) in rows)
    decreasing = bool(np.all(np.diff(basis.lam) < 0.0))
    max_rel = float(max(rel_errs))
    passed = in_gap and decreasing and gram_dev <= GRAM_TOL and max_rel <= ORACLE_REL_TOL
    summary = {
        "b0": params.b0,
        "b1": params.b1,
        "N": basis.n_modes,
        "gram_max_dev": gram_dev,
        "max_rel_err_vs_fd": max_rel,
        "eigenvalues_in_dirichlet_gaps": in_gap,
        "eigenvalues_decreasing": decreasing,
        "normalization_bound_holds": [
            normalization_bound(m) for m in basis.modes
        ],
        "passed": passed,
    }
    write_json(os.path.join(out, "spectrum.json"), summary)
    with open(os.path.join(out, "basis.json"), "w", newline="\n") as fh:
        fh.write(basis_to_json(basis))
    if not passed:
        return _emit_error("spectrum invariants failed (see spectrum.json)", 1)
    return 0


def cmd_simulate(cfg: RunConfig, out: str, threads: int) -> int:
    _, basis, coeffs, sim = _build_setup(cfg)
    initial = _initial_state(cfg.initial, basis)
    stats = ensemble_stats(sim, coeffs, basis, initial, cfg.n_paths, threads)
    payload = {
        "config": cfg.as_dict(),
        "n_paths": stats.n_paths,
        "mean_terminal": stats.mean_terminal,
        "var_terminal": stats.var_terminal,
        "se": stats.se_terminal,
        "mean_norm": stats.mean_norm,
        "var_norm": stats.var_norm,
        "se_norm": stats.se_norm,
    }
    write_json(os.path.join(out, "ensemble.json"), payload)
    header = ["t"] + [f"a_{k}" for k in range(cfg.n_modes)]
    for p in range(min(cfg.record_paths, cfg.n_paths)):
        record = simulate_path(sim, coeffs, basis, initial, path_index=p)
        rows = [
            (record.times[i], *record.states[i]) for i in range(len(record.times))
        ]
        write_csv(os.path.join(out, f"path_{p:04d}.csv"), header, rows)
    return 0


def _make_policies(cfg: RunConfig, problem, coeffs, basis):
    policies = []
    for spec in cfg.policy_specs():
        parts = spec.split(":")
        kind = parts[0]
        if kind == "zero" and len(parts) == 1:
            policies.append(ctl.ZeroPolicy())
        elif kind == "constant" and len(parts) == 3:
            policies.append(
                ctl.ConstantPolicy((float(parts[1]), float(parts[2])), problem.Z)
            )
        elif kind == "grid" and len(parts) == 2:
            policies.extend(ctl.constant_grid_policies(problem.Z, int(parts[1])))
        elif kind == "feedback" and len(parts) == 2:
            name = parts[1]
            if name == "zero":
                provider = ctl.ZeroGradient(basis.n_modes)
            elif name == "terminal_proxy":
                provider = ctl.TerminalProxyGradient(problem, basis)
            elif name == "nested_mc":
                provider = ctl.NestedMCGradient(
                    problem,
                    coeffs,
                    basis,
                    inner_paths=64,
                    n_dirs=4,
                    inner_dt=2e-2,
                    seed=cfg.seed,
                )
            else:
                raise ConfigError(f"unknown gradient provider {name!r}")
            policies.append(ctl.FeedbackPolicy(provider, problem, coeffs, basis))
        else:
            raise ConfigError(f"unknown policy spec {spec!r}")
    return policies


def _sanitize(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name).strip("_")


def cmd_control(cfg: RunConfig, out: str, threads: int) -> int:
    _, basis, coeffs, sim = _build_setup(cfg)
    initial = _initial_state(cfg.initial, basis)
    problem = ctl.quadratic_problem(
        Z=ctl.ball(cfg.ball_radius),
        state_cost=lambda t, a: float(a @ a),
        terminal_cost=lambda a: float(a @ a),
        t0=cfg.t0,
        T=cfg.T,
        terminal_gradient=lambda a: 2.0 * a,
    )
    policies = _make_policies(cfg, problem, coeffs, basis)
    report = ctl.compare_policies(
        problem, policies, sim, coeffs, basis, initial, cfg.n_paths, threads
    )
    payload = {
        "config": cfg.as_dict(),
        "seed": report.seed,
        "n_paths": report.n_paths,
        "policies": [
            {"name": r.name, "J": r.J, "se": r.se} for r in report.policies
        ],
        "pairwise": [
            {"a": r.a, "b": r.b, "diff": r.diff, "paired_se": r.paired_se}
            for r in report.pairwise
        ],
    }
    write_json(os.path.join(out, "report.json"), payload)
    header = ["t", "z0", "z1"] + [f"a_{k}" for k in range(cfg.n_modes)]
    for idx, policy in enumerate(policies):
        record = ctl.policy_path(policy, problem, sim, coeffs, basis, initial, 0)
        rows = [
            (record.times[i], *record.controls[i], *record.states[i])
            for i in range(len(record.controls))
        ]
        write_csv(
            os.path.join(out, f"trace_{idx:02d}_{_sanitize(policy.name)}.csv"),
            header,
            rows,
        )
    return 0


def cmd_validate(cfg: RunConfig, out: str, threads: int) -> int:
    results = validate.run_all(cfg, threads)
    for res in results:
        sys.stdout.write(
            f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.measured}\n"
        )
    payload = {
        "config": cfg.as_dict(),
        "checks": [
            {"name": r.name, "passed": r.passed, "measured": r.measured}
            for r in results
        ],
        "passed": all(r.passed for r in results),
    }
    write_json(os.path.join(out, "validate.json"), payload)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynbc",
        description=(
            "Spectral solver, stochastic simulator and boundary-control "
            "harness for the 1-D heat equation with dynamical boundary "
            "conditions."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("spectrum", "solve the eigenproblem and cross-check it"),
        ("simulate", "run a Monte Carlo ensemble of mild-solution paths"),
        ("control", "compare control policies under shared random numbers"),
        ("validate", "run the full invariant suite"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker cap")
    return parser


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "control": cmd_control,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg = with_overrides(cfg, seed=args.seed)
    except ConfigError as exc:
        return _emit_error(str(exc), 2)
    os.makedirs(args.out, exist_ok=True)
    try:
        return _COMMANDS[args.command](cfg, args.out, max(1, args.threads))
    except ConfigError as exc:
        return _emit_error(str(exc), 2)
    except DynbcError as exc:
        return _emit_error(f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
