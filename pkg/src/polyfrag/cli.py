"""Command-line entry point.

Exit codes: 0 success, 2 configuration or validation error (including a
CFL rejection), 3 solver failure (non-convergence, negative density, fit
failure), 4 I/O error, 5 a requested tolerance check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXAMPLE_CONFIG, build_grid, build_kernel, build_params, load_config
from .eigen import EigenSolution, assemble_operator, principal_eigenpair, write_solution
from .errors import (
    CFLError,
    ConvergenceError,
    DomainError,
    FitError,
    NegativeDensityError,
    ParseError,
)
from .model import steady_monomer, validate_params
from .scaling import l1_distance, scale_eigenfunction
from .simulate import (
    SimConfig,
    SimMode,
    empirical_growth_rate,
    initial_profile,
    shape_convergence,
    simulate,
    write_snapshots,
    write_trajectory,
)
from .strainfit import PUBLISHED_FITS, FitVariant, curve, fit, load_strains, published_sse

logger = logging.getLogger("polyfrag")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4
EXIT_TOLERANCE = 5


@dataclass
class RunConfig:
    subcommand: str
    config_path: str | None
    out: Path
    fmt: str = "table"
    variant: str | None = None
    tolerance: float | None = None
    grid_n: int | None = None
    x_min: float | None = None
    x_max: float | None = None
    quiet: bool = False
    seed: int | None = None  # reserved; every algorithm here is deterministic


class _Output:
    """Writes tables as TSV or JSON depending on ``fmt``."""

    def __init__(self, out: Path, fmt: str):
        self.out = out
        self.fmt = fmt
        out.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, columns: list[str], rows: list, meta: dict | None = None) -> Path:
        if self.fmt == "object":
            path = self.out / f"{stem}.json"
            payload = {"columns": columns, "rows": [list(map(_jsonable, r)) for r in rows]}
            if meta:
                payload["meta"] = _jsonable(meta)
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
            return path
        path = self.out / f"{stem}.tsv"
        lines = [f"# {k}: {json.dumps(_jsonable(v), sort_keys=True)}" for k, v in (meta or {}).items()]
        lines.append("\t".join(columns))
        lines.extend("\t".join(_cell(v) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n")
        return path

    def obj(self, stem: str, payload: dict) -> Path:
        path = self.out / f"{stem}.json"
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        return path


def _cell(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _say(run: RunConfig, text: str):
    if not run.quiet:
        print(text)


def _config(run: RunConfig) -> dict:
    cfg = load_config(run.config_path)
    for key, val in (("n", run.grid_n), ("x_min", run.x_min), ("x_max", run.x_max)):
        if val is not None:
            cfg["grid"][key] = val
    return cfg


def _check_params(params):
    report = validate_params(params)
    if not report.passed:
        raise DomainError("parameter validation failed:\n" + report.describe())


def _solve_base(cfg: dict, params) -> EigenSolution:
    grid = build_grid(cfg["grid"])
    op = assemble_operator(grid, build_kernel(cfg), params.gamma, params.nu)
    e = cfg["eigen"]
    return principal_eigenpair(op, tol=float(e["tol"]), max_iter=int(e["max_iter"]),
                               method=e["method"])


def cmd_eigen(run: RunConfig) -> int:
    cfg = _config(run)
    params = build_params(cfg)
    _check_params(params)
    base = _solve_base(cfg, params)
    out = _Output(run.out, run.fmt)
    v_bar = steady_monomer(params)
    scaled = scale_eigenfunction(base, params, v_bar)
    summary = base.summary()
    summary["scaled"] = {"V_bar": v_bar, "eigenvalue": scaled.eigenvalue,
                         "mean_size": scaled.mean_size, "model": params.to_dict()}
    if run.fmt == "object":
        out.obj("eigen_solution", {"summary": summary, "x": base.nodes, "density": base.density})
    else:
        write_solution(base, run.out / "eigen_solution.tsv")
    out.obj("eigen_summary", summary)
    _say(run, f"r1 = {base.eigenvalue:.10g}   x1_bar = {base.mean_size:.10g}   "
              f"residual = {base.residual:.3g}   ({base.iterations} iterations)")
    _say(run, f"at V_bar = {v_bar:g}: r = {scaled.eigenvalue:.10g}   x_bar = {scaled.mean_size:.10g}")
    return EXIT_OK


def cmd_scale_check(run: RunConfig) -> int:
    cfg = _config(run)
    params = build_params(cfg)
    if not params.growth_exponent_sum > 0:
        raise DomainError("well-posedness requires gamma + 1 - nu > 0")
    sc = cfg["scale_check"]
    tol = float(sc["tolerance"] if run.tolerance is None else run.tolerance)
    l1_tol = float(sc["l1_tolerance"])
    base = _solve_base(cfg, params)
    grid = base.grid
    kernel = build_kernel(cfg)
    e = cfg["eigen"]
    rows = []
    all_ok = True
    for beta0 in sc["beta0"]:
        for vtau in sc["v_tau0"]:
            p = type(params)(tau0=float(vtau), nu=params.nu, beta0=float(beta0),
                             gamma=params.gamma, mu0=0.0, lam=1.0, delta=1.0)
            scaled = scale_eigenfunction(base, p, 1.0)
            try:
                op = assemble_operator(grid, kernel, params.gamma, params.nu,
                                       beta0=float(beta0), v_tau0=float(vtau))
                direct = principal_eigenpair(op, tol=float(e["tol"]),
                                             max_iter=int(e["max_iter"]), method=e["method"])
            except ConvergenceError as exc:
                logger.warning("direct solve failed for beta0=%g, V*tau0=%g: %s", beta0, vtau, exc)
                rows.append([beta0, vtau, float("nan"), scaled.eigenvalue, float("nan"),
                             float("nan"), float("nan"), scaled.mean_size, False])
                all_ok = False
                continue
            rel = abs(scaled.eigenvalue - direct.eigenvalue) / abs(direct.eigenvalue)
            dist = l1_distance(scaled, direct)
            ok = rel <= tol and dist <= l1_tol
            all_ok &= ok
            rows.append([float(beta0), float(vtau), direct.eigenvalue, scaled.eigenvalue, rel,
                         dist, direct.mean_size, scaled.mean_size, ok])
    cols = ["beta0", "v_tau0", "r_direct", "r_scaled", "rel_error", "l1_distance",
            "xbar_direct", "xbar_scaled", "ok"]
    _Output(run.out, run.fmt).table(
        "scale_check", cols, rows,
        meta={"r1": base.eigenvalue, "x1_bar": base.mean_size, "tolerance": tol,
              "l1_tolerance": l1_tol, "gamma": params.gamma, "nu": params.nu},
    )
    for row in rows:
        _say(run, f"beta0={row[0]:<6g} V*tau0={row[1]:<6g} rel_err={row[4]:.3e} "
                  f"L1={row[5]:.3e} {'ok' if row[8] else 'FAIL'}")
    if not all_ok:
        _say(run, "scale check failed")
        return EXIT_TOLERANCE if all(not math.isnan(r[2]) for r in rows) else EXIT_SOLVER
    return EXIT_OK


def _sim_config(cfg: dict, params, reference: EigenSolution | None) -> SimConfig:
    s = cfg["simulate"]
    grid = build_grid(s["grid"])
    init = dict(s["initial"])
    profile = init.pop("profile", "exponential")
    u0 = initial_profile(grid, profile, reference=reference, **init)
    mode = SimMode(s["mode"])
    cfg_args = dict(params=params, grid=grid, u0=u0, t_end=float(s["t_end"]),
                    kernel=build_kernel(cfg), V0=s["V0"], mode=mode, stride=int(s["stride"]))
    dt = s["dt"]
    if dt is None:
        probe = SimConfig(dt=1.0, **{**cfg_args, "t_end": 1.0})
        dt = float(s["cfl"]) / probe.cfl_number()
    return SimConfig(dt=float(dt), **cfg_args)


def cmd_simulate(run: RunConfig) -> int:
    cfg = _config(run)
    params = build_params(cfg)
    _check_params(params)
    s = cfg["simulate"]
    reference = None
    if s["compare_eigen"] or s["initial"].get("profile") == "eigenfunction":
        base = _solve_base(cfg, params)
        reference = scale_eigenfunction(base, params, steady_monomer(params))
    sim_cfg = _sim_config(cfg, params, reference)
    traj = simulate(sim_cfg)
    out = _Output(run.out, run.fmt)
    v_bar = steady_monomer(params)
    summary = {
        "mode": sim_cfg.mode.value,
        "dt": sim_cfg.dt,
        "t_end": sim_cfg.t_end,
        "samples": len(traj),
        "max_monomer_deviation": traj.max_monomer_deviation(v_bar),
        "final_P": traj.P[-1],
        "final_M": traj.M[-1],
        "final_V": traj.V[-1],
    }
    shape = None
    status = EXIT_OK
    if reference is not None and s["compare_eigen"]:
        _, shape = shape_convergence(traj, reference)
        summary["shape_distance_initial"] = shape[0]
        summary["shape_distance_final"] = shape[-1]
        summary["r_eigen"] = reference.eigenvalue
        if np.all(traj.P > 0):
            r_emp = empirical_growth_rate(traj, s["window"])
            rel = abs(r_emp - reference.eigenvalue) / abs(reference.eigenvalue)
            summary.update(r_empirical=r_emp, rel_error=rel, window=s["window"])
            if sim_cfg.mode is SimMode.FROZEN_V:
                tol = float(s["tolerance"] if run.tolerance is None else run.tolerance)
                summary["tolerance"] = tol
                summary["within_tolerance"] = rel <= tol
                if rel > tol:
                    status = EXIT_TOLERANCE
        else:
            summary["r_empirical"] = None
    if run.fmt == "object":
        out.obj("trajectory", {
            "t": traj.times, "V": traj.V, "P": traj.P, "M": traj.M,
            **({"shape_distance": shape} if shape is not None else {}),
        })
    else:
        write_trajectory(traj, run.out / "trajectory.tsv", shape=shape)
    if s["snapshots"]:
        write_snapshots(traj, run.out / "snapshots")
    out.obj("simulate_summary", summary)
    for key in ("r_empirical", "r_eigen", "rel_error", "max_monomer_deviation",
                "shape_distance_final"):
        if summary.get(key) is not None:
            _say(run, f"{key:>22s} = {summary[key]:.6g}")
    return status


def _variants(run: RunConfig, cfg: dict) -> list[FitVariant]:
    choice = run.variant or cfg["fit"]["variant"]
    if choice == "both":
        return [FitVariant.MU0_ZERO, FitVariant.MU0_FREE]
    return [FitVariant(choice)]


def cmd_fit(run: RunConfig) -> int:
    cfg = _config(run)
    f = cfg["fit"]
    records = load_strains(f["data"])
    out = _Output(run.out, run.fmt)
    results = {}
    for variant in _variants(run, cfg):
        res = fit(records, variant, nu_bounds=tuple(f["nu_bounds"]),
                  mu0_bounds=tuple(f["mu0_bounds"]),
                  allow_nu_above_one=bool(f["allow_nu_above_one"]),
                  upper_nu_bounds=tuple(f["upper_nu_bounds"]),
                  n_nu=int(f["n_nu"]), n_mu=int(f["n_mu"]), n_starts=int(f["n_starts"]))
        results[variant] = res
        report = res.as_dict()
        if f["data"] is None:
            report["published"] = dict(PUBLISHED_FITS[variant])
            report["published"]["sse"] = published_sse(records, variant)
        stem = variant.value.replace("-", "_")
        if run.fmt == "object":
            out.obj(f"fit_{stem}", report)
        else:
            out.table(f"fit_{stem}_residuals", ["name", "r", "G", "G_hat", "residual"],
                      [[d["name"], d["r"], d["G"], d["G_hat"], d["residual"]]
                       for d in report["residuals"]],
                      meta={k: v for k, v in report.items() if k != "residuals"})
        c = f["curve"]
        rr, gg = curve(res, float(c["r_min"]), float(c["r_max"]), int(c["n"]))
        out.table(f"curve_{stem}", ["r", "G_hat"], [[a, b] for a, b in zip(rr.tolist(), gg.tolist())])

    names = [v.value for v in results]
    rows = [[key] + [getattr(results[v], key) for v in results]
            for key in ("nu", "mu0", "A", "b", "r_squared", "sse")]
    out.table("fit_summary", ["parameter"] + names, rows)
    _say(run, "\t".join(["parameter"] + names))
    for row in rows:
        _say(run, "\t".join([row[0]] + [f"{v:.4g}" for v in row[1:]]))
    return EXIT_OK


COMMANDS = {
    "eigen": cmd_eigen,
    "scale-check": cmd_scale_check,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML configuration file")
    common.add_argument("--out", metavar="DIR", default="polyfrag-out", help="output directory")
    common.add_argument("--format", choices=["table", "object"], default="table",
                        help="tab-separated tables or JSON objects")
    common.add_argument("--tolerance", type=float, help="override the tolerance of the check")
    common.add_argument("--grid-n", type=int)
    common.add_argument("--x-min", type=float)
    common.add_argument("--x-max", type=float)
    common.add_argument("--seed", type=int, help="reserved; results are deterministic")
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="polyfrag",
        description="Eigenproblem, scaling checks, simulation and strain fits "
                    "for polymerization-fragmentation models with power-law rates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("eigen", parents=[common], help="normalized principal eigenpair")
    sub.add_parser("scale-check", parents=[common], help="direct vs rescaled eigenpairs")
    sub.add_parser("simulate", parents=[common], help="time-dependent simulation")
    p_fit = sub.add_parser("fit", parents=[common], help="fit stability vs growth rate")
    p_fit.add_argument("--variant", choices=["mu0-zero", "mu0-free", "both"])
    sub.add_parser("show-config", help="print a commented example configuration")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "show-config":
        sys.stdout.write(EXAMPLE_CONFIG)
        return EXIT_OK
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else (logging.ERROR if args.quiet else logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    run = RunConfig(
        subcommand=args.subcommand, config_path=args.config, out=Path(args.out),
        fmt=args.format, variant=getattr(args, "variant", None), tolerance=args.tolerance,
        grid_n=args.grid_n, x_min=args.x_min, x_max=args.x_max, quiet=args.quiet, seed=args.seed,
    )
    try:
        return COMMANDS[args.subcommand](run)
    except CFLError as exc:
        print(f"error: CFL condition violated: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NegativeDensityError, FitError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, ParseError, KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
