"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy import special as sp

from . import __version__
from .errors import DomainError, NumericalFailure, TruncationError
from .exponents import admissible_beta_interval, check_theorem2_hypotheses
from .functionals import (
    check_j_moment_bound,
    compute_series,
    g_lower_bound_check,
    identity_sides,
)
from .harness import SweepConfig, SweepTable, lifespan_sweep, params_from_dict, simulation_from_dict
from .ode_blowup import BlowupReport, OdeScenario, integrate
from .pde import EquationForm, RadialState, RadialTrajectory, containment_margin
from .records import fmt, read_csv, write_csv, write_json
from .special import Hyp2F1Params, gauss_2f1
from .testfunctions import (
    TestFunctionSpec,
    cone_sample,
    conjugate_residual,
    hypergeometric_ode_residual,
    psi_beta,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("epdtlab")


class ConfigError(Exception):
    pass


def load_config(path: str | None, required: bool = True) -> dict:
    if path is None:
        if required:
            raise ConfigError("--config is required for this subcommand")
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {p} must hold a JSON object")
    return data


def _out_dir(args) -> Path | None:
    return Path(args.out) if args.out else None


# --- exponents -------------------------------------------------------------

EXP_HEADER = ("m", "n", "mu", "nu", "p", "delta", "p_S", "p_F", "regime", "dominant", "admissible")


def cmd_exponents(args) -> int:
    cfg = load_config(args.config)
    cases = cfg.get("cases", [cfg])
    rows = []
    for case in cases:
        prm = params_from_dict(case)
        rep = check_theorem2_hypotheses(prm)
        rows.append((prm.m, prm.n, prm.mu, prm.nu, prm.p, prm.delta, rep.p_strauss, rep.p_fujita,
                     rep.delta_class, rep.dominant_exponent, rep.admissible))
    widths = [max(len(h), 12) for h in EXP_HEADER]
    print("  ".join(h.rjust(w) for h, w in zip(EXP_HEADER, widths)))
    for row in rows:
        cells = [f"{v:.10g}" if isinstance(v, float) else fmt(v) for v in row]
        print("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    out = _out_dir(args)
    if out:
        write_csv(out / "exponents.csv", EXP_HEADER, rows)
    return EXIT_OK


# --- hyp-verify ------------------------------------------------------------

def cmd_hyp_verify(args) -> int:
    """Compare the series layer against SciPy and check the adjoint-equation residual."""
    cfg = load_config(args.config, required=False)
    rng = np.random.default_rng(args.seed)
    tol = float(cfg.get("tolerance", 1e-9))
    cases = cfg.get("cases")
    if cases is None:
        cases = [
            {"a": float(a), "b": float(b), "c": float(c), "z": [float(z)]}
            for a, b, c, z in zip(
                rng.uniform(-2, 2, 20), rng.uniform(-2, 2, 20), rng.uniform(0.5, 4, 20), rng.uniform(0, 0.95, 20)
            )
        ]
    rows = []
    worst = 0.0
    for case in cases:
        hp = Hyp2F1Params(float(case["a"]), float(case["b"]), float(case["c"]))
        for z in case["z"]:
            val = gauss_2f1(hp, float(z)).value
            ref = float(sp.hyp2f1(hp.a, hp.b, hp.c, float(z)))
            err = abs(val - ref) / max(1.0, abs(ref))
            worst = max(worst, err)
            rows.append((hp.a, hp.b, hp.c, float(z), val, ref, err))

    n_specs = int(cfg.get("random_specs", 5))
    n_pts = int(cfg.get("points", 20))
    res_tol = float(cfg.get("residual_tolerance", 1e-5))
    res_rows = []
    band_rows = []
    worst_res = 0.0
    while len(res_rows) < n_specs:
        prm = params_from_dict(
            {"m": float(rng.uniform(0, 1.5)), "n": int(rng.integers(1, 5)),
             "mu": float(rng.uniform(0, 4)), "nu": float(rng.uniform(0, 0.7))}
        )
        if not prm.delta > 0:
            continue
        iv = admissible_beta_interval(prm)
        if iv.empty:
            continue
        beta = float(rng.uniform(iv.lo, iv.hi)) if math.isfinite(iv.hi) else iv.lo + 1.0
        spec = TestFunctionSpec(beta, prm)
        t, r = cone_sample(prm.m, n_pts, rng)
        rep = conjugate_residual(spec, t, r)
        worst_res = max(worst_res, rep.normalized)
        res_rows.append((prm.m, prm.n, prm.mu, prm.nu, beta, rep.normalized))
        zs = np.append(np.arange(0.0, 0.95, 0.1), 0.99)
        ode = hypergeometric_ode_residual
        for z in zs:
            # bound column: the lower bound psi >= 1 on [0, 1)
            band_rows.append((beta, z, float(psi_beta(spec, z)), ode(spec, z).normalized, 1.0))

    print(f"2F1 vs scipy: {len(rows)} points, worst relative error {worst:.3e} (tolerance {tol:g})")
    print(f"adjoint residual: {len(res_rows)} specs, worst normalized {worst_res:.3e} (tolerance {res_tol:g})")
    out = _out_dir(args)
    if out:
        write_csv(out / "hyp2f1.csv", ("a", "b", "c", "z", "value", "reference", "rel_err"), rows)
        write_csv(out / "adjoint_residual.csv", ("m", "n", "mu", "nu", "beta", "normalized_residual"), res_rows)
        write_csv(out / "psi_bands.csv", ("beta", "z_or_t", "value", "residual", "bound"), band_rows)
    return EXIT_OK if worst <= tol and worst_res <= res_tol else EXIT_NUMERIC


# --- simulate --------------------------------------------------------------

def save_run(traj: RadialTrajectory, cfg: dict, out: Path) -> dict:
    """Write config, physical-variable snapshots and a summary; return the summary."""
    phys = traj.physical()
    write_json(out / "config.json", cfg)
    for i, s in enumerate(phys.snapshots):
        write_csv(out / "snapshots" / f"snap_{i:04d}.csv", ("r", "u", "v"),
                  zip(np.asarray(s.r), np.asarray(s.u), np.asarray(s.v)))
    tol = float(cfg.get("containment_rel_tol", 1e-8))
    margin = containment_margin(traj, rel_tol=tol)
    summary = {
        "params": traj.params.to_dict(),
        "delta": traj.params.delta,
        "form": traj.form.tag,
        "grid": {"r_max": traj.grid.r_max, "n_points": traj.grid.n_points, "dr": traj.grid.dr},
        "report": traj.report.to_dict(),
        "snapshot_times": traj.times,
        "max_abs_u": [float(np.max(np.abs(s.u))) for s in phys.snapshots],
        "containment_min_margin": float(np.min(margin)),
        "containment_ok": bool(np.all(margin >= 0)),
        "containment_rel_tol": tol,
        "notes": list(traj.notes),
    }
    if traj.report.extrapolated:
        summary["extrapolation"] = "heuristic: (T-t)^(-2/(p-1)) growth assumed"
    write_json(out / "summary.json", summary)
    return summary


def load_run(run_dir: Path) -> RadialTrajectory:
    """Rebuild a trajectory (original variables) from a ``simulate`` output directory."""
    cfg = load_config(str(run_dir / "config.json"))
    summary = load_config(str(run_dir / "summary.json"))
    sim = simulation_from_dict(cfg)
    files = sorted((run_dir / "snapshots").glob("snap_*.csv"))
    if not files:
        raise ConfigError(f"no snapshots in {run_dir / 'snapshots'}")
    times = summary["snapshot_times"]
    r = None
    states = []
    for f, t in zip(files, times):
        _, data = read_csv(f)
        if r is None:
            r = data[:, 0].copy()
            r.setflags(write=False)
        states.append(RadialState(float(t), r, data[:, 1], data[:, 2]))
    rep = summary["report"]
    report = BlowupReport(
        blew_up=rep["blew_up"], t_detect=float(rep["t_detect"]), t_extrapolated=float(rep["t_extrapolated"]),
        threshold=float(rep["threshold"]), steps=rep["steps"], rejected_steps=rep["rejected_steps"],
        mode=rep["mode"],
    )
    return RadialTrajectory(
        EquationForm("original"), sim.params, sim.grid, tuple(states), report,
        states[0].u, states[0].v, sim.solver,
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sim = simulation_from_dict(cfg)
    traj = sim.run()
    out = _out_dir(args) or Path("simulate_out")
    summary = save_run(traj, cfg, out)
    rep = traj.report
    state = f"blow-up at t~{rep.t_extrapolated:.6g} (detected {rep.t_detect:.6g})" if rep.blew_up else "no blow-up"
    print(f"{sim.form.tag} run: {len(traj.snapshots)} snapshots, {state}, "
          f"containment {'ok' if summary['containment_ok'] else 'VIOLATED'}; wrote {out}")
    return EXIT_OK


# --- ode-blowup ------------------------------------------------------------

def cmd_ode_blowup(args) -> int:
    cfg = load_config(args.config)
    kind = cfg.get("kind", "zhou")
    horizon = float(cfg.get("horizon", 1e6))
    p = float(cfg["p"])
    rows = []
    if kind == "zhou":
        key = "epsilon"
        for eps in cfg.get("eps", [1.0]):
            sc = OdeScenario.zhou_eps(p, float(cfg.get("c", 1.0)), float(cfg.get("C", 1.0)), float(eps),
                                      C_prime=cfg.get("C_prime"), s0=float(cfg.get("sigma0", 1.0)))
            rows.append((float(eps), integrate(sc, horizon)))
    elif kind == "kato":
        key = "K0"
        for k0 in cfg.get("K0", [1.0]):
            sc = OdeScenario.kato(p, float(cfg["a"]), float(cfg["q"]), float(k0), float(cfg.get("K1", 1.0)),
                                  float(cfg.get("R", 1.0)), float(cfg.get("T0", 1.0)))
            rows.append((float(k0), integrate(sc, horizon)))
    elif kind == "power":
        key = "U0"
        for u0 in cfg.get("U0", [1.0]):
            sc = OdeScenario("power", p, float(u0), float(cfg.get("U1", 0.0)), start=float(cfg.get("start", 0.0)),
                             c=float(cfg.get("c", 1.0)))
            rows.append((float(u0), integrate(sc, horizon)))
    else:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    table = [(v, r.blew_up, r.t_detect, r.t_extrapolated) for v, r in rows]
    for v, b, td, te in table:
        print(f"{key}={v:.6g}: " + (f"blow-up t_detect={td:.10g} t_extrapolated={te:.10g}" if b else "no blow-up"))
    out = _out_dir(args)
    if out:
        write_csv(out / "ode_blowup.csv", (key, "blew_up", "t_detect", "t_extrapolated"), table)
    return EXIT_OK


# --- sweep -----------------------------------------------------------------

def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    config = SweepConfig.from_dict(cfg)
    table, fit = lifespan_sweep(config)
    out = _out_dir(args) or Path("sweep_out")
    write_csv(out / "sweep.csv", SweepTable.HEADER, table.as_rows())
    for i, row in enumerate(table.row_dicts()):
        write_json(out / "runs" / f"run_{i:02d}" / "summary.json", {"target": config.target, **row})
    write_json(out / "summary.json", {
        "config": config.to_dict(),
        "fit": fit.to_dict() if fit else None,
        "monotone": table.monotone,
        "warnings": list(table.warnings),
    })
    if fit:
        print(f"{config.fit_mode} fit: slope={fit.slope:.6g} intercept={fit.intercept:.6g} r2={fit.r_squared:.6f}")
    for w in table.warnings:
        print(f"warning: {w}")
    return EXIT_OK if table.monotone else EXIT_NUMERIC


# --- functionals -----------------------------------------------------------

FUNC_HEADER = ("t", "H", "I", "J", "F", "G", "E1_lhs", "E1_rhs", "j_bound_ok")


def cmd_functionals(args) -> int:
    if not args.run:
        raise ConfigError("--run <dir> (a simulate output directory) is required")
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise ConfigError(f"run directory not found: {run_dir}")
    cfg = load_config(args.config, required=False)
    traj = load_run(run_dir)
    prm = traj.params
    interval = admissible_beta_interval(prm)
    if "beta" in cfg:
        beta = float(cfg["beta"])
    elif not interval.empty:
        beta = interval.midpoint()
    else:
        raise ConfigError("admissible beta interval is empty for these parameters")
    spec = TestFunctionSpec(beta, prm)
    series = compute_series(traj, spec)
    ok = check_j_moment_bound(series)
    notes = []
    if prm.M < 1.0 / (prm.m + 1.0) and beta in interval:
        _, lhs, rhs = identity_sides(traj, spec)
        e1 = float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(lhs)), 1e-300))
    else:
        lhs = rhs = np.full(series.times.shape, math.nan)
        e1 = math.nan
        notes.append("identity skipped: needs M < 1/(m+1) and an admissible beta")
    summary = {"beta": beta, "E1_relative_discrepancy": e1, "j_bound_all": bool(np.all(ok)), "notes": notes}
    if abs(prm.delta - 1.0) <= 1e-12:
        band = g_lower_bound_check(traj, T0=float(cfg.get("T0", 2.0)))
        summary["G_band"] = {"ok": band.ok, "inf": band.inf_value, "sup": band.sup_value,
                             "window": list(band.window), "notes": list(band.notes)}
    out = _out_dir(args) or run_dir
    rows = zip(series.times, series.H, series.I, series.J, series.F, series.G, lhs, rhs, ok)
    write_csv(out / "functionals.csv", FUNC_HEADER, rows)
    write_json(out / "functionals_summary.json", summary)
    print(f"beta={beta:.6g}: identity discrepancy {e1:.3e}, moment bound {'holds' if np.all(ok) else 'FAILS'}")
    return EXIT_OK if np.all(ok) else EXIT_NUMERIC


# --- dispatch --------------------------------------------------------------

COMMANDS = {
    "exponents": cmd_exponents,
    "hyp-verify": cmd_hyp_verify,
    "simulate": cmd_simulate,
    "ode-blowup": cmd_ode_blowup,
    "sweep": cmd_sweep,
    "functionals": cmd_functionals,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epdtlab",
        description="Numerical tools for semilinear Tricomi-type wave equations with time-dependent damping and mass.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in COMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", help="JSON configuration file")
        sp_.add_argument("--out", help="output directory")
        sp_.add_argument("--seed", type=int, default=0, help="seed for randomized fixtures")
        sp_.add_argument("-v", "--verbose", action="store_true")
        if name == "functionals":
            sp_.add_argument("--run", help="directory written by 'simulate'")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError, KeyError, TypeError) as exc:
        msg = f"missing config key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, TruncationError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
