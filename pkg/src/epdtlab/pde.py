"""Radial method-of-lines solver for the semilinear equation and its transformed forms.

All forms share one spatial discretisation: second-order centred differences
for ``u_rr + (n-1)/r u_r`` on ``r_j = j dr`` with an even ghost node at the
origin and homogeneous Dirichlet data at ``r_max``. Time stepping uses the
shared Dormand-Prince integrator under a CFL cap.

Public times are always the original time ``t``. The Liouville form runs in
``s = t^(m+1)/(m+1)`` internally; conversion happens at the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, NumericalFailure
from .exponents import ModelParams, phi
from .integrate import NONFINITE, dopri54
from .ode_blowup import BlowupReport, pole_report
from .special import sphere_area
from .testfunctions import ResidualReport

PDE_THRESHOLD = 1e8
FORMS = ("original", "dissipative", "liouville", "delta1", "linear")


@dataclass(frozen=True)
class EquationForm:
    """Which change of unknown (and time) the solver integrates."""

    tag: str = "original"

    def __post_init__(self):
        if self.tag not in FORMS:
            raise DomainError(f"unknown equation form {self.tag!r}; expected one of {FORMS}")

    def validate(self, params: ModelParams) -> None:
        if self.tag in ("dissipative", "liouville"):
            params.require_positive_delta()
        if self.tag == "delta1" and abs(params.delta - 1.0) > 1e-12:
            raise DomainError(f"delta1 form needs delta = 1, got {params.delta}")

    def exponent(self, params: ModelParams) -> float:
        """``alpha`` in ``u = t^alpha * (native unknown)``."""
        if self.tag in ("dissipative", "liouville"):
            return (params.sqrt_delta - params.mu + 1.0) / 2.0
        if self.tag == "delta1":
            return -params.mu / 2.0
        return 0.0

    def native_time(self, t, params: ModelParams):
        return phi(t, params.m) if self.tag == "liouville" else t

    def physical_time(self, tau, params: ModelParams):
        if self.tag == "liouville":
            return ((params.m + 1.0) * tau) ** (1.0 / (params.m + 1.0))
        return tau


def _as_form(form) -> EquationForm:
    return form if isinstance(form, EquationForm) else EquationForm(str(form))


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    n_points: int

    def __post_init__(self):
        if not self.r_max > 0:
            raise DomainError("r_max must be positive")
        if int(self.n_points) != self.n_points or self.n_points < 5:
            raise DomainError("n_points must be an integer >= 5")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def dr(self) -> float:
        return self.r_max / (self.n_points - 1)

    @property
    def r(self) -> np.ndarray:
        out = np.arange(self.n_points) * self.dr
        out.setflags(write=False)
        return out

    def refined(self) -> "RadialGrid":
        """Grid with half the spacing whose even nodes coincide with this one."""
        return RadialGrid(self.r_max, 2 * (self.n_points - 1) + 1)

    @classmethod
    def for_horizon(cls, params: ModelParams, t_end: float, n_points: int, margin: float = 1.0):
        """Smallest sensible grid that keeps the light cone inside by ``margin``."""
        reach = phi(t_end, params.m) - phi(1.0, params.m) + params.M
        return cls(reach + margin, n_points)

    def contains_cone(self, params: ModelParams, t_end: float) -> bool:
        return self.r_max >= phi(t_end, params.m) - phi(1.0, params.m) + params.M


@dataclass(frozen=True)
class RadialState:
    t: float
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class DataProfile:
    """Unscaled initial data: ``u0 = (1 - (r/M)^2)_+^power`` and ``u1 = u1_factor * u0``."""

    kind: str = "bump"
    power: float = 4.0
    u1_factor: float = 1.0

    def __post_init__(self):
        if self.kind != "bump":
            raise DomainError(f"unknown data profile {self.kind!r}")
        if self.power < 2:
            raise DomainError("bump power must be at least 2 for a C^1 profile")

    def u0(self, r, M: float):
        r = np.asarray(r, dtype=float)
        return np.clip(1.0 - (r / M) ** 2, 0.0, None) ** self.power

    def u1(self, r, M: float):
        return self.u1_factor * self.u0(r, M)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "power": self.power, "u1_factor": self.u1_factor}


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.4
    rtol: float = 1e-8
    atol: float = 1e-12
    threshold: float = PDE_THRESHOLD
    max_retries: int = 3

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise DomainError("cfl must lie in (0, 1]")
        if self.threshold <= 0:
            raise DomainError("threshold must be positive")

    def to_dict(self) -> dict:
        return {
            "cfl": self.cfl,
            "rtol": self.rtol,
            "atol": self.atol,
            "threshold": self.threshold,
            "max_retries": self.max_retries,
        }


@dataclass(frozen=True)
class RadialTrajectory:
    """Snapshots of one run, in the variables of ``form``, plus its report.

    ``u0``/``u1`` hold the (epsilon-scaled) original-variable data on the grid
    so that the run can be repeated in another form.
    """

    form: EquationForm
    params: ModelParams
    grid: RadialGrid
    snapshots: tuple
    report: BlowupReport
    u0: np.ndarray
    u1: np.ndarray
    config: SolverConfig = field(default_factory=SolverConfig)
    notes: tuple = ()

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def physical(self) -> "RadialTrajectory":
        """The same trajectory expressed through ``u`` and ``u_t`` of the original equation."""
        if self.form.tag in ("original", "linear"):
            return self
        states = tuple(to_physical(self.form, self.params, s) for s in self.snapshots)
        return replace(self, form=EquationForm("original"), snapshots=states)


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def laplacian(u: np.ndarray, dr: float, n: int) -> np.ndarray:
    """Radial Laplacian with an even ghost at ``r=0``; the last node is left at 0."""
    out = np.zeros_like(u)
    out[0] = n * 2.0 * (u[1] - u[0]) / dr**2
    inner = slice(1, -1)
    d2 = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dr**2
    if n > 1:
        j = np.arange(1, u.size - 1)
        d2 = d2 + (n - 1) * (u[2:] - u[:-2]) / (2.0 * dr * dr * j)
    out[inner] = d2
    return out


def _coefficients(form: EquationForm, params: ModelParams):
    """``(speed2, damping, mass, forcing)`` as functions of the native time."""
    m, mu, nu, p = params.m, params.mu, params.nu, params.p
    tag = form.tag
    alpha = form.exponent(params)
    if tag == "liouville":
        k = m + 1.0
        return (
            lambda s: 1.0,
            lambda s: (1.0 + params.sqrt_delta / k) / s,
            lambda s: 0.0,
            lambda s: form.physical_time(s, params) ** (alpha * (p - 1.0) - 2.0 * m),
        )
    speed2 = lambda t: t ** (2.0 * m)  # noqa: E731
    if tag in ("original", "linear"):
        force = (lambda t: 1.0) if tag == "original" else (lambda t: 0.0)
        return speed2, lambda t: mu / t, lambda t: nu**2 / t**2, force
    damping = (lambda t: (1.0 + params.sqrt_delta) / t) if tag == "dissipative" else (lambda t: 0.0)
    return speed2, damping, lambda t: 0.0, lambda t: t ** (alpha * (p - 1.0))


def _make_rhs(form: EquationForm, params: ModelParams, grid: RadialGrid, source=None):
    speed2, damping, mass, force = _coefficients(form, params)
    N, dr, n, p = grid.n_points, grid.dr, params.n, params.p
    r = grid.r

    def fun(tau, y):
        u, v = y[:N], y[N:]
        dv = speed2(tau) * laplacian(u, dr, n) - damping(tau) * v - mass(tau) * u
        f = force(tau)
        if f != 0.0:
            dv = dv + f * np.abs(u) ** p
        if source is not None:
            dv = dv + source(tau, r)
        dv[-1] = 0.0
        du = v.copy()
        du[-1] = 0.0
        return np.concatenate([du, dv])

    return fun


def rhs(form, params: ModelParams, state: RadialState, source: Callable | None = None):
    """Time derivative ``(du, dv)`` of ``state`` (native variables, native time)."""
    form = _as_form(form)
    r = np.asarray(state.r, dtype=float)
    grid = RadialGrid(float(r[-1]), r.size)
    y = np.concatenate([state.u, state.v])
    if not np.all(np.isfinite(y)):
        raise NumericalFailure("non-finite state passed to rhs")
    out = _make_rhs(form, params, grid, source)(state.t, y)
    return out[: r.size], out[r.size :]


def native_data(form, params: ModelParams, u0, u1):
    """Initial native unknown and velocity from original-variable data at ``t = 1``."""
    form = _as_form(form)
    alpha = form.exponent(params)
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    # d/dt (t^-alpha u) at t=1; the Liouville time derivative coincides there since t^m = 1
    return u0.copy(), u1 - alpha * u0


def to_physical(form, params: ModelParams, state: RadialState) -> RadialState:
    """Map a native-variable state to ``(t, u, u_t)``; ``state.t`` is already physical."""
    form = _as_form(form)
    alpha = form.exponent(params)
    t = state.t
    dtau_dt = t**params.m if form.tag == "liouville" else 1.0
    u = t**alpha * state.u
    ut = alpha * t ** (alpha - 1.0) * state.u + t**alpha * dtau_dt * state.v
    return RadialState(t, state.r, _frozen(u), _frozen(ut))


def _resolve_data(data, grid: RadialGrid, params: ModelParams, which: str, profile: DataProfile):
    if data is None:
        return getattr(profile, which)(grid.r, params.M)
    if callable(data):
        return np.asarray(data(grid.r), dtype=float)
    arr = np.asarray(data, dtype=float)
    if arr.shape != (grid.n_points,):
        raise DomainError(f"{which} must have {grid.n_points} grid values")
    return arr


def run(
    form,
    params: ModelParams,
    grid: RadialGrid,
    t_end: float,
    output_times=(),
    u0=None,
    u1=None,
    *,
    profile: DataProfile = DataProfile(),
    config: SolverConfig = SolverConfig(),
    source: Callable | None = None,
) -> RadialTrajectory:
    """Solve from ``t = 1`` to ``t_end`` (original time) and record snapshots.

    ``u0``/``u1`` are unscaled profiles (callables of ``r`` or nodal arrays);
    they are multiplied by ``params.epsilon``. Defaults come from ``profile``.
    Snapshots are taken at ``t = 1`` and at every requested output time reached
    before blow-up. If the stepper produces non-finite values the run restarts
    with the CFL constant halved, at most ``config.max_retries`` times.
    """
    form = _as_form(form)
    form.validate(params)
    if not t_end > 1.0:
        raise DomainError("t_end must exceed the initial time 1")
    eps = params.epsilon
    d0 = eps * _resolve_data(u0, grid, params, "u0", profile)
    d1 = eps * _resolve_data(u1, grid, params, "u1", profile)
    d0[-1] = d1[-1] = 0.0
    w0, w1 = native_data(form, params, d0, d1)
    y0 = np.concatenate([w0, w1])

    out_t = sorted({float(t) for t in output_times if 1.0 < t <= t_end})
    tau0 = float(form.native_time(1.0, params))
    tau_end = float(form.native_time(t_end, params))
    tau_out = [float(form.native_time(t, params)) for t in out_t]
    fun = _make_rhs(form, params, grid, source)
    N = grid.n_points
    m = params.m
    notes = []
    cfl = config.cfl
    for attempt in range(config.max_retries + 1):
        if form.tag == "liouville":
            cap = cfl * grid.dr
        else:
            cap = lambda tau, c=cfl: c * grid.dr / max(1.0, tau**m)  # noqa: E731
        res = dopri54(
            fun,
            tau0,
            y0,
            tau_end,
            rtol=config.rtol,
            atol=config.atol,
            h0=0.1 * cfl * grid.dr,
            max_step=cap,
            output_times=tau_out,
            monitor=lambda y: float(np.max(np.abs(y[:N]))),
            threshold=config.threshold,
            history=400,
            record=lambda tau, y: float(np.max(np.abs(y[:N]))),
        )
        if res.status != NONFINITE:
            break
        notes.append(f"non-finite state with cfl={cfl:g}; restarting with cfl={cfl / 2:g}")
        cfl /= 2.0
    else:
        notes.append("retries exhausted; non-finite state treated as blow-up")

    tau_to_t = dict(zip(tau_out, out_t))
    snaps = [RadialState(1.0, grid.r, _frozen(w0), _frozen(w1))]
    for tau, y in res.outputs:
        t = tau_to_t.get(tau, float(form.physical_time(tau, params)))
        if t > snaps[-1].t:
            snaps.append(RadialState(t, grid.r, _frozen(y[:N]), _frozen(y[N:])))

    hist = [(float(form.physical_time(tau, params)), val) for tau, val in res.history]
    res = replace(res, t=float(form.physical_time(res.t, params)), history=hist)
    report = pole_report(res, config.threshold, alpha=2.0 / (params.p - 1.0))
    if report.blew_up or notes:
        report = replace(report, notes=report.notes + tuple(notes))
    return RadialTrajectory(
        form=form,
        params=params,
        grid=grid,
        snapshots=tuple(snaps),
        report=report,
        u0=_frozen(d0),
        u1=_frozen(d1),
        config=replace(config, cfl=cfl),
        notes=tuple(notes),
    )


def rerun(trajectory: RadialTrajectory, form=None, grid: RadialGrid | None = None) -> RadialTrajectory:
    """Repeat a run with the same data, optionally in another form or on another grid.

    A new grid must nest the old one (see :meth:`RadialGrid.refined`); data are
    re-sampled from the stored nodal values by linear interpolation.
    """
    form = trajectory.form if form is None else _as_form(form)
    grid = trajectory.grid if grid is None else grid
    eps = trajectory.params.epsilon
    if eps == 0:
        u0 = u1 = np.zeros(grid.n_points)
    else:
        u0 = np.interp(grid.r, trajectory.grid.r, trajectory.u0) / eps
        u1 = np.interp(grid.r, trajectory.grid.r, trajectory.u1) / eps
    times = trajectory.times
    t_end = float(times[-1]) if times.size > 1 else None
    if t_end is None or t_end <= 1.0:
        raise DomainError("trajectory has no snapshots after t=1 to reproduce")
    return run(form, trajectory.params, grid, t_end, times[1:], u0, u1, config=trajectory.config)


def _coarse(state: RadialState, n_coarse: int) -> np.ndarray:
    step = (state.u.size - 1) // (n_coarse - 1)
    return np.asarray(state.u)[::step]


def truncation_error(trajectory: RadialTrajectory) -> float:
    """Max difference (original variables) between this run and one on the refined grid."""
    fine = rerun(trajectory, grid=trajectory.grid.refined())
    a = trajectory.physical().snapshots
    b = fine.physical().snapshots
    N = trajectory.grid.n_points
    return max(
        float(np.max(np.abs(sa.u - _coarse(sb, N)))) for sa, sb in zip(a, b) if sa.t == sb.t
    )


def transform_roundtrip(
    params: ModelParams,
    trajectory: RadialTrajectory,
    direction,
    truncation: float | None = None,
) -> ResidualReport:
    """Re-solve ``trajectory`` in the form ``direction`` and compare in original variables.

    The report's ``max_abs_residual`` is the largest pointwise discrepancy of
    ``u`` over common snapshots; ``scale`` is the native truncation error (the
    difference against a run on the refined grid), so ``normalized`` is the
    ratio the round-trip contract bounds.
    """
    if params != trajectory.params:
        raise DomainError("params do not match the trajectory")
    target = _as_form(direction)
    target.validate(params)
    other = rerun(trajectory, form=target)
    a = {s.t: s for s in trajectory.physical().snapshots}
    b = {s.t: s for s in other.physical().snapshots}
    common = sorted(set(a) & set(b))
    if not common:
        raise NumericalFailure("no common snapshot times to compare")
    disc = max(float(np.max(np.abs(a[t].u - b[t].u))) for t in common)
    scale = truncation_error(trajectory) if truncation is None else truncation
    amplitude = max(float(np.max(np.abs(a[t].u))) for t in common)
    return ResidualReport(
        max_abs_residual=disc,
        scale=scale if scale > 0 else 1.0,
        sample_points=len(common),
        details={
            "from": trajectory.form.tag,
            "to": target.tag,
            "truncation_error": scale,
            "amplitude": amplitude,
        },
    )


def support_radius(state: RadialState, tolerance: float) -> float:
    """Largest node radius where ``|u|`` exceeds ``tolerance`` (0 if none)."""
    idx = np.nonzero(np.abs(np.asarray(state.u)) > tolerance)[0]
    return float(state.r[idx[-1]]) if idx.size else 0.0


def containment_margin(trajectory: RadialTrajectory, rel_tol: float = 1e-8, slack_nodes: int = 5):
    """Per snapshot: ``bound - support`` with the cone bound padded by ``slack_nodes`` nodes.

    Nonnegative entries mean the snapshot respects finite propagation speed.
    """
    prm = trajectory.params
    out = []
    for s in trajectory.physical().snapshots:
        amp = float(np.max(np.abs(s.u)))
        rad = support_radius(s, rel_tol * amp) if amp > 0 else 0.0
        bound = phi(s.t, prm.m) - phi(1.0, prm.m) + prm.M + slack_nodes * trajectory.grid.dr
        out.append(bound - rad)
    return np.array(out)


def l2_norm(state: RadialState, n: int) -> float:
    """Spatial L^2 norm of a radial profile (trapezoid with the sphere weight)."""
    r = np.asarray(state.r)
    return math.sqrt(sphere_area(n) * np.trapezoid(np.asarray(state.u) ** 2 * r ** (n - 1), r))
