"""Integral functionals of solver trajectories and the identities they satisfy.

Spatial integrals use the trapezoid rule on the solver grid with the surface
weight ``|S^(n-1)| r^(n-1)``. Time integrals use the cumulative trapezoid rule
on the snapshot times; their error is estimated by repeating the quadrature on
every other snapshot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError
from .exponents import ModelParams, admissible_beta_interval, beta_q
from .pde import RadialTrajectory
from .special import sphere_area
from .testfunctions import (
    ResidualReport,
    TestFunctionSpec,
    lambda_t,
    psi_bar_beta,
    psi_beta,
    psi_beta_prime,
    spatial_weight,
)

MIN_SNAPSHOTS = 8


def radial_integral(values, r, n: int) -> float:
    """``int f(|x|) dx`` for nodal values of ``f`` on the radii ``r``."""
    r = np.asarray(r, dtype=float)
    return float(sphere_area(n) * np.trapezoid(np.asarray(values, dtype=float) * r ** (n - 1), r))


def _cumulative(y, t) -> np.ndarray:
    return cumulative_trapezoid(y, t, initial=0.0)


def time_integrals(times, H):
    """``I(t) = int_1^t (t-s) s H ds`` and ``J(t) = int_1^t (1+s)^-3 I ds`` on the snapshot grid."""
    t = np.asarray(times, dtype=float)
    H = np.asarray(H, dtype=float)
    I = t * _cumulative(t * H, t) - _cumulative(t**2 * H, t)
    J = _cumulative(I / (1.0 + t) ** 3, t)
    return I, J


def second_moment(times, H) -> np.ndarray:
    """``int_1^t (t-s)^2 H(s) ds``."""
    t = np.asarray(times, dtype=float)
    H = np.asarray(H, dtype=float)
    return t**2 * _cumulative(H, t) - 2.0 * t * _cumulative(t * H, t) + _cumulative(t**2 * H, t)


def _halving_error(times, H, fn) -> float:
    """Max change of ``fn(times, H)`` when every other snapshot is dropped."""
    t = np.asarray(times)
    if t.size < 5:
        return math.inf
    full = np.atleast_2d(np.asarray(fn(t, H)))
    half = np.atleast_2d(np.asarray(fn(t[::2], np.asarray(H)[::2])))
    diff = np.abs(full[:, ::2] - half)
    # trapezoid error scales as h^2, so the coarse error is ~4x the fine one
    return float(np.max(diff) / 3.0)


@dataclass(frozen=True)
class FunctionalSeries:
    times: np.ndarray
    H: np.ndarray
    I: np.ndarray
    J: np.ndarray
    F: np.ndarray
    G: np.ndarray
    I_err: float = 0.0
    J_err: float = 0.0
    notes: tuple = ()

    @classmethod
    def from_H(cls, times, H, F=None, G=None) -> "FunctionalSeries":
        t = np.asarray(times, dtype=float)
        H = np.asarray(H, dtype=float)
        I, J = time_integrals(t, H)
        zeros = np.zeros_like(t)
        return cls(
            times=t,
            H=H,
            I=I,
            J=J,
            F=zeros if F is None else np.asarray(F, dtype=float),
            G=zeros if G is None else np.asarray(G, dtype=float),
            I_err=_halving_error(t, H, lambda a, b: time_integrals(a, b)[0]),
            J_err=_halving_error(t, H, lambda a, b: time_integrals(a, b)[1]),
        )


def _cone_mask(spec: TestFunctionSpec, t: float, r: np.ndarray):
    z = spec.z_of(t, r)
    return z, z < 1.0


def weighted_profile(spec: TestFunctionSpec, t: float, r: np.ndarray, kind: str = "phi") -> np.ndarray:
    """Nodal ``Phi_beta(t, r)`` (``kind='phi'``) or ``psi_bar_beta(z)`` (``kind='bar'``); 0 outside the cone."""
    z, inside = _cone_mask(spec, t, r)
    out = np.zeros_like(r, dtype=float)
    if not np.any(inside):
        return out
    if kind == "phi":
        out[inside] = t ** (1.0 - spec.beta) * psi_beta(spec, z[inside])
    elif kind == "bar":
        out[inside] = psi_bar_beta(spec, z[inside])
    else:
        raise DomainError(f"unknown profile kind {kind!r}")
    return out


@lru_cache(maxsize=16)
def _kato_weight(r_max: float, n_points: int, n: int) -> np.ndarray:
    r = np.arange(n_points) * (r_max / (n_points - 1))
    out = spatial_weight(r, n)
    out.setflags(write=False)
    return out


def compute_series(trajectory: RadialTrajectory, spec: TestFunctionSpec) -> FunctionalSeries:
    """``H, I, J`` for the weight ``Phi_beta`` and ``F, G`` for ``w = t^(mu/2) u``.

    ``G(t) = lambda(t) int w(t, x) phi(x) dx`` is the Kato-side functional; it is
    meaningful for ``delta = 1`` but is evaluated regardless.
    """
    snaps = trajectory.physical().snapshots
    if len(snaps) < MIN_SNAPSHOTS:
        raise DomainError(
            f"need at least {MIN_SNAPSHOTS} snapshots for time quadrature, got {len(snaps)}; "
            "request denser output_times"
        )
    prm = trajectory.params
    n, m, p = prm.n, prm.m, prm.p
    grid = trajectory.grid
    r = np.asarray(grid.r)
    weight = _kato_weight(grid.r_max, grid.n_points, n)
    times, H, F, G = [], [], [], []
    for s in snaps:
        u = np.asarray(s.u)
        times.append(s.t)
        if not np.any(u):
            H.append(0.0)
            F.append(0.0)
            G.append(0.0)
            continue
        H.append(radial_integral(np.abs(u) ** p * weighted_profile(spec, s.t, r), r, n))
        w = s.t ** (prm.mu / 2.0) * u
        F.append(radial_integral(w, r, n))
        G.append(lambda_t(m, s.t) * radial_integral(w * weight, r, n))
    return FunctionalSeries.from_H(times, H, F, G)


def data_functionals(trajectory: RadialTrajectory, spec: TestFunctionSpec):
    """``(eps E0, eps E1)`` from the stored nodal data, on the solver grid."""
    prm = trajectory.params
    k = prm.m + 1.0
    r = np.asarray(trajectory.grid.r)
    u0, u1 = np.asarray(trajectory.u0), np.asarray(trajectory.u1)
    z, inside = _cone_mask(spec, 1.0, r)
    psi = np.zeros_like(r)
    dpsi = np.zeros_like(r)
    psi[inside] = psi_beta(spec, z[inside])
    dpsi[inside] = psi_beta_prime(spec, z[inside])
    e0 = radial_integral(u0 * psi, r, prm.n)
    e1 = radial_integral(
        u1 * psi + u0 * (2.0 * k**3 * r**2 * dpsi + (prm.mu + spec.beta - 1.0) * psi), r, prm.n
    )
    return e0, e1


def identity_sides(trajectory: RadialTrajectory, spec: TestFunctionSpec):
    """Both sides of the weak-form identity at each snapshot.

    ``lhs = eps E0 + eps E1 (t-1) + int_1^t (t-s) H ds`` and
    ``rhs = int u Phi dx + int_1^t s^-beta int u psi_bar dx ds``.
    """
    prm = trajectory.params
    snaps = trajectory.physical().snapshots
    r = np.asarray(trajectory.grid.r)
    t = np.array([s.t for s in snaps])
    H = np.empty_like(t)
    bulk = np.empty_like(t)
    bar = np.empty_like(t)
    for i, s in enumerate(snaps):
        u = np.asarray(s.u)
        H[i] = radial_integral(np.abs(u) ** prm.p * weighted_profile(spec, s.t, r), r, prm.n)
        bulk[i] = radial_integral(u * weighted_profile(spec, s.t, r), r, prm.n)
        bar[i] = s.t ** (-spec.beta) * radial_integral(u * weighted_profile(spec, s.t, r, "bar"), r, prm.n)
    e0, e1 = data_functionals(trajectory, spec)
    lhs = e0 + e1 * (t - 1.0) + t * _cumulative(H, t) - _cumulative(t * H, t)
    rhs = bulk + _cumulative(bar, t)
    return t, lhs, rhs


def check_identity_E1(
    trajectory: RadialTrajectory, spec: TestFunctionSpec, params: ModelParams | None = None
) -> ResidualReport:
    """Max over snapshots of ``|lhs - rhs|`` relative to ``max |lhs|``.

    The trajectory must be a nonlinear run of the original equation (or a
    transformed form of it) with data supported inside ``r < 1/(m+1)``.
    """
    prm = trajectory.params if params is None else params
    if prm != trajectory.params:
        raise DomainError("params do not match the trajectory")
    if trajectory.form.tag == "linear":
        raise DomainError("the identity involves the nonlinear term; linear runs do not satisfy it")
    prm.require_small_support()
    interval = admissible_beta_interval(prm)
    if spec.beta not in interval:
        raise DomainError(f"beta={spec.beta} outside the admissible interval {interval}")
    if len(trajectory.snapshots) < MIN_SNAPSHOTS:
        raise DomainError(f"need at least {MIN_SNAPSHOTS} snapshots")
    t, lhs, rhs = identity_sides(trajectory, spec)
    scale = float(np.max(np.abs(lhs)))
    return ResidualReport(
        max_abs_residual=float(np.max(np.abs(lhs - rhs))),
        scale=scale,
        sample_points=int(t.size),
        details={"times": t, "lhs": lhs, "rhs": rhs},
    )


def check_j_moment_bound(series: FunctionalSeries, rel_tol: float = 1e-10) -> np.ndarray:
    """Per-time truth of ``t^2 J(t) <= (1/2) int_1^t (t-s)^2 H(s) ds``.

    The comparison allows the estimated quadrature error of both sides plus
    ``rel_tol`` times the right-hand side magnitude.
    """
    t = series.times
    lhs = t**2 * series.J
    rhs = 0.5 * second_moment(t, series.H)
    rhs_err = _halving_error(t, series.H, lambda a, b: 0.5 * second_moment(a, b))
    slack = t**2 * series.J_err + rhs_err + rel_tol * np.abs(rhs)
    if not np.isfinite(slack).all():
        slack = rel_tol * np.abs(rhs)
    return lhs <= rhs + slack


@dataclass(frozen=True)
class LowerBandReport:
    ok: bool
    inf_value: float
    sup_value: float
    window: tuple
    samples: int
    notes: tuple = ()


def g_lower_bound_check(
    trajectory: RadialTrajectory, params: ModelParams | None = None, T0: float = 2.0, spec=None
) -> LowerBandReport:
    """Band of ``G(t) t^m`` over snapshots with ``t >= T0``; ``ok`` iff its infimum is positive."""
    prm = trajectory.params if params is None else params
    if abs(prm.delta - 1.0) > 1e-12:
        raise DomainError(f"the G functional check needs delta = 1, got {prm.delta}")
    snaps = [s for s in trajectory.physical().snapshots if s.t >= T0]
    if not snaps:
        raise DomainError(f"no snapshots at or after T0={T0}")
    r = np.asarray(trajectory.grid.r)
    weight = _kato_weight(trajectory.grid.r_max, trajectory.grid.n_points, prm.n)
    vals = np.array(
        [
            lambda_t(prm.m, s.t)
            * radial_integral(s.t ** (prm.mu / 2.0) * np.asarray(s.u) * weight, r, prm.n)
            * s.t**prm.m
            for s in snaps
        ]
    )
    window = (snaps[0].t, snaps[-1].t)
    if not np.any(vals):
        return LowerBandReport(False, 0.0, 0.0, window, len(snaps), ("zero data: vacuous",))
    lo, hi = float(np.min(vals)), float(np.max(vals))
    return LowerBandReport(lo > 0.0, lo, hi, window, len(snaps))


def conjugate_exponent_residual(q: float, params: ModelParams) -> float:
    """``((m+1)(n-2) - mu + 1 - 2 beta_q) / (2(m+1)) + 1/q'`` which should vanish."""
    if q <= 1:
        raise DomainError("q must exceed 1")
    k = params.m + 1.0
    lhs = (k * (params.n - 2) - params.mu + 1.0 - 2.0 * beta_q(q, params)) / (2.0 * k)
    q_conj = q / (q - 1.0)
    return lhs + 1.0 / q_conj


def lp_norm(u, r, n: int, p: float) -> float:
    return radial_integral(np.abs(np.asarray(u)) ** p, r, n) ** (1.0 / p)


def envelope_ratio(trajectory: RadialTrajectory, q: float) -> np.ndarray:
    """Ratio of the identity's left side (weight ``beta_q``) to the ``L^p`` envelope.

    For ``q > p`` the envelope is
    ``t^(1 - beta_q + (m+1)n/p') ||u(t)||_p + int_1^t s^(-beta_p + (m+1)n/p') ||u(s)||_p ds``;
    for ``q = p`` only the time integral of ``H`` enters the left side and the
    integrand gains a ``(log s)^(1/p')`` factor. A bounded ratio is the
    numerical counterpart of the existential constant.
    """
    prm = trajectory.params
    p = prm.p
    if q < p:
        raise DomainError("the envelope is stated for q >= p")
    pc = p / (p - 1.0)
    k = prm.m + 1.0
    bq, bp = beta_q(q, prm), beta_q(p, prm)
    spec = TestFunctionSpec(bq, prm)
    t, lhs, _ = identity_sides(trajectory, spec)
    snaps = trajectory.physical().snapshots
    r = np.asarray(trajectory.grid.r)
    norms = np.array([lp_norm(s.u, r, prm.n, p) for s in snaps])
    integrand = t ** (-bp + k * prm.n / pc) * norms
    if q == p:
        e0, e1 = data_functionals(trajectory, spec)
        lhs = lhs - e0 - e1 * (t - 1.0)
        integrand = integrand * np.log(t) ** (1.0 / pc)
    env = t ** (1.0 - bq + k * prm.n / pc) * norms + _cumulative(integrand, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(env > 0, lhs / env, np.nan)


@dataclass(frozen=True)
class DerivativeCheck:
    """Relative residuals of the differential relations among ``H, I, J``."""

    first: float
    second: float
    j_relation: float
    details: dict = field(default_factory=dict)


def derivative_relations(series: FunctionalSeries) -> DerivativeCheck:
    """``I' = int_1^t s H``, ``I'' = t H`` and ``(1+t)^3 J' = I`` by numerical differentiation."""
    t = series.times
    if t.size < MIN_SNAPSHOTS:
        raise DomainError(f"need at least {MIN_SNAPSHOTS} samples")
    dI = np.gradient(series.I, t, edge_order=2)
    d2I = np.gradient(dI, t, edge_order=2)
    dJ = np.gradient(series.J, t, edge_order=2)
    target1 = _cumulative(t * series.H, t)
    target2 = t * series.H
    inner = slice(2, -2)

    def rel(a, b):
        scale = max(float(np.max(np.abs(b[inner]))), 1e-300)
        return float(np.max(np.abs(a[inner] - b[inner])) / scale)

    return DerivativeCheck(
        first=rel(dI, target1),
        second=rel(d2I, target2),
        j_relation=rel((1.0 + t) ** 3 * dJ, series.I),
    )
