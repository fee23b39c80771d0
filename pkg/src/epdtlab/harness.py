"""Experiment orchestration: config parsing and lifespan sweeps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .exponents import ModelParams, check_theorem2_hypotheses
from .fitting import FitResult, fit_linear
from .ode_blowup import OdeScenario, integrate
from .pde import DataProfile, EquationForm, RadialGrid, SolverConfig, run

log = logging.getLogger(__name__)

__all__ = [
    "FitResult",
    "fit_linear",
    "SweepConfig",
    "SweepRow",
    "SweepTable",
    "lifespan_sweep",
    "params_from_dict",
    "simulation_from_dict",
]

MAX_SWEEP_POINTS = 2048
MAX_PDE_EPS = 6
PARAM_KEYS = ("m", "n", "mu", "nu", "p", "epsilon", "M")


def params_from_dict(d: dict) -> ModelParams:
    unknown = set(d) & {"delta"}
    if unknown:
        raise DomainError("delta is derived from mu and nu; do not set it")
    return ModelParams(**{k: d[k] for k in PARAM_KEYS if k in d})


@dataclass(frozen=True)
class Simulation:
    params: ModelParams
    form: EquationForm
    grid: RadialGrid
    t_end: float
    output_times: tuple
    profile: DataProfile
    solver: SolverConfig

    def run(self):
        return run(
            self.form, self.params, self.grid, self.t_end, self.output_times,
            profile=self.profile, config=self.solver,
        )


def simulation_from_dict(d: dict) -> Simulation:
    """Parse a run config; see the README for the schema."""
    prm = params_from_dict(d)
    if "t_end" not in d:
        raise DomainError("config needs t_end")
    t_end = float(d["t_end"])
    g = d.get("grid", {})
    n_points = int(g.get("n_points", 1024))
    grid = (
        RadialGrid(float(g["r_max"]), n_points)
        if "r_max" in g
        else RadialGrid.for_horizon(prm, t_end, n_points)
    )
    if not grid.contains_cone(prm, t_end):
        log.warning("r_max=%g does not contain the light cone at t_end=%g", grid.r_max, t_end)
    if "output_times" in d:
        outs = tuple(float(x) for x in d["output_times"])
    else:
        count = int(d.get("n_output", 20))
        outs = tuple(np.linspace(1.0, t_end, count + 1)[1:].tolist())
    prof = d.get("profile", {})
    solver = SolverConfig(
        cfl=float(d.get("cfl", 0.4)),
        rtol=float(d.get("rtol", 1e-8)),
        atol=float(d.get("atol", 1e-12)),
        threshold=float(d.get("threshold", 1e8)),
    )
    return Simulation(
        prm,
        EquationForm(d.get("form", "original")),
        grid,
        t_end,
        outs,
        DataProfile(power=float(prof.get("power", 4.0)), u1_factor=float(prof.get("u1_factor", 1.0))),
        solver,
    )


@dataclass(frozen=True)
class SweepConfig:
    """An epsilon sweep.

    ``target`` is ``"pde"`` (full solver) or ``"zhou_surrogate"`` (the scalar
    ODE in the logarithmic time ``sigma``). ``fit_mode`` is ``"loglog"``
    (``log T`` against ``log eps``) or ``"log_vs_inverse_power"`` (``log T``
    against ``eps^(-p(p-1))``).
    """

    base: ModelParams
    eps_values: tuple
    target: str = "zhou_surrogate"
    fit_mode: str = "loglog"
    horizon: float = 1e12
    n_points: int = 1024
    output_count: int = 20
    profile: DataProfile = field(default_factory=DataProfile)
    solver: SolverConfig = field(default_factory=SolverConfig)
    zhou_c: float = 1.0
    zhou_C: float = 1.0
    workers: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        object.__setattr__(self, "eps_values", eps)
        if len(eps) < 4:
            raise DomainError("a sweep needs at least 4 epsilon values")
        if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
            raise DomainError("eps_values must be positive and strictly decreasing")
        if self.target not in ("pde", "zhou_surrogate"):
            raise DomainError(f"unknown sweep target {self.target!r}")
        if self.fit_mode not in ("loglog", "log_vs_inverse_power"):
            raise DomainError(f"unknown fit mode {self.fit_mode!r}")
        if self.target == "pde":
            if self.n_points > MAX_SWEEP_POINTS:
                raise DomainError(f"pde sweeps are capped at n_points={MAX_SWEEP_POINTS}")
            if len(eps) > MAX_PDE_EPS:
                raise DomainError(f"pde sweeps are capped at {MAX_PDE_EPS} epsilon values")
            if self.fit_mode == "log_vs_inverse_power":
                rep = check_theorem2_hypotheses(self.base)
                if not rep.admissible:
                    raise DomainError(f"params fail the lifespan-theorem hypotheses: {rep.reasons}")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        base = params_from_dict(d.get("base", {}))
        solver = d.get("solver", {})
        prof = d.get("profile", {})
        return cls(
            base=base,
            eps_values=tuple(d["eps_values"]),
            target=d.get("target", "zhou_surrogate"),
            fit_mode=d.get("fit_mode", "loglog"),
            horizon=float(d.get("horizon", 1e12)),
            n_points=int(d.get("n_points", 1024)),
            output_count=int(d.get("output_count", 20)),
            profile=DataProfile(power=float(prof.get("power", 4.0)), u1_factor=float(prof.get("u1_factor", 1.0))),
            solver=SolverConfig(**solver),
            zhou_c=float(d.get("zhou_c", 1.0)),
            zhou_C=float(d.get("zhou_C", 1.0)),
            workers=int(d.get("workers", 1)),
        )

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "eps_values": list(self.eps_values),
            "target": self.target,
            "fit_mode": self.fit_mode,
            "horizon": self.horizon,
            "n_points": self.n_points,
            "output_count": self.output_count,
            "profile": self.profile.to_dict(),
            "solver": self.solver.to_dict(),
            "zhou_c": self.zhou_c,
            "zhou_C": self.zhou_C,
        }


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    blew_up: bool
    t_detect: float
    t_lifespan: float
    log_T: float
    censored: bool


@dataclass(frozen=True)
class SweepTable:
    rows: tuple
    monotone: bool
    warnings: tuple = ()

    HEADER = ("epsilon", "blew_up", "t_detect", "t_lifespan", "log_T", "censored")

    def row_dicts(self) -> list[dict]:
        return [dict(zip(self.HEADER, row)) for row in self.as_rows()]

    def as_rows(self):
        return [(r.epsilon, r.blew_up, r.t_detect, r.t_lifespan, r.log_T, r.censored) for r in self.rows]


def _log_expm1(x: float) -> float:
    """``log(e^x - 1)`` without overflow."""
    return x + math.log1p(-math.exp(-x)) if x > 30 else math.log(math.expm1(x))


def _one(config: SweepConfig, eps: float) -> SweepRow:
    prm = config.base
    if config.target == "zhou_surrogate":
        sc = OdeScenario.zhou_eps(prm.p, config.zhou_c, config.zhou_C, eps)
        rep = integrate(sc, config.horizon)
        if not rep.blew_up:
            return SweepRow(eps, False, rep.t_detect, math.inf, math.inf, True)
        sigma = rep.t_extrapolated
        # the surrogate runs in sigma with 1 + t = e^sigma; log T refers to t
        log_t = _log_expm1(sigma) if config.fit_mode == "log_vs_inverse_power" else math.log(sigma)
        return SweepRow(eps, True, rep.t_detect, sigma, log_t, False)
    sim = Simulation(
        prm.with_(epsilon=eps),
        EquationForm("original"),
        RadialGrid.for_horizon(prm, config.horizon, config.n_points),
        config.horizon,
        tuple(np.linspace(1.0, config.horizon, config.output_count + 1)[1:].tolist()),
        config.profile,
        config.solver,
    )
    rep = sim.run().report
    if not rep.blew_up:
        return SweepRow(eps, False, rep.t_detect, math.inf, math.inf, True)
    return SweepRow(eps, True, rep.t_detect, rep.t_extrapolated, math.log(rep.t_extrapolated), False)


def lifespan_sweep(config: SweepConfig) -> tuple[SweepTable, FitResult | None]:
    """Run every epsilon, censor runs that survive the horizon, and fit the rest.

    Rows are ordered by epsilon descending. ``monotone`` is False if the
    lifespan ever decreases as epsilon decreases (a quality error, logged).
    """
    eps = config.eps_values
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            rows = list(pool.map(_one, [config] * len(eps), eps))
    else:
        rows = [_one(config, e) for e in eps]
    warnings = []
    censored = [r.epsilon for r in rows if r.censored]
    if censored:
        warnings.append(f"censored (no blow-up before horizon): eps={censored}")
    live = [r for r in rows if not r.censored]
    monotone = all(b.t_lifespan >= a.t_lifespan for a, b in zip(live, live[1:]))
    if not monotone:
        warnings.append("lifespan not monotone in epsilon")
    for w in warnings:
        log.warning(w)
    fit = None
    if len(live) >= 3:
        e = np.array([r.epsilon for r in live])
        y = np.array([r.log_T for r in live])
        p = config.base.p
        x = np.log(e) if config.fit_mode == "loglog" else e ** (-p * (p - 1.0))
        fit = fit_linear(x, y)
    else:
        warnings.append("fewer than 3 uncensored runs; no fit")
    return SweepTable(tuple(rows), monotone, tuple(warnings)), fit
