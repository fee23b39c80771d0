"""Equality forms of the two blow-up differential inequalities.

``zhou``:   U'' + 2U' = c s^(1-p) U^p + 2 g          (s >= s0)
``kato``:   F'' = K1 (t + R)^(-q) F^p                 (t >= T0)
``power``:  u'' = c u^p                               (exact pole test problem)

For ``zhou`` the constant source ``2 g`` (``g = floor_slope``) keeps
``U' >= g`` along the whole trajectory, so the scenario built by
:meth:`OdeScenario.zhou_eps` satisfies ``U >= C eps^p s`` and
``U' >= C' eps^p`` for all ``s``, not only at the start.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .fitting import FitResult, extrapolate_pole, fit_linear
from .integrate import NONFINITE, STEP_COLLAPSE, THRESHOLD, dopri54
from .testfunctions import ResidualReport

log = logging.getLogger(__name__)

ODE_THRESHOLD = 1e12
STEP_FLOOR = 1e-14
EXTRAPOLATION_STEPS = 10


@dataclass(frozen=True)
class OdeScenario:
    kind: str
    p: float
    U0: float
    U1: float
    start: float = 1.0
    c: float = 1.0
    floor_slope: float = 0.0
    K0: float = 1.0
    K1: float = 1.0
    a: float = 1.0
    q: float = 3.0
    R: float = 1.0
    epsilon: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("zhou", "kato", "power"):
            raise DomainError(f"unknown scenario kind {self.kind!r}")
        if not self.p > 1:
            raise DomainError("p must exceed 1")
        if self.kind == "zhou":
            if self.start <= 0:
                raise DomainError("the zhou scenario starts at s0 > 0 (s^(1-p) is singular at 0)")
            if self.c <= 0 or self.floor_slope < 0:
                raise DomainError("zhou coefficients must be positive")
        if self.kind == "kato":
            if abs((self.p - 1.0) * self.a - (self.q - 2.0)) > 1e-12:
                raise DomainError("kato scenario requires (p-1) a = q - 2")
            if self.a < 1:
                raise DomainError("kato scenario requires a >= 1")
            if min(self.K0, self.K1, self.R, self.start) <= 0:
                raise DomainError("kato coefficients K0, K1, R, T0 must be positive")

    @classmethod
    def zhou_eps(cls, p, c, C, eps, C_prime=None, s0=1.0):
        """Zhou scenario with data ``(C eps^p s0, C' eps^p)`` and the slope floor ``C' eps^p``."""
        cp = C if C_prime is None else C_prime
        return cls(
            "zhou", p, C * eps**p * s0, cp * eps**p, start=s0, c=c,
            floor_slope=cp * eps**p, epsilon=eps,
        )

    @classmethod
    def kato(cls, p, a, q, K0, K1=1.0, R=1.0, T0=1.0):
        """Kato scenario started tangent to the growth bound ``K0 (t+R)^a``."""
        base = T0 + R
        return cls(
            "kato", p, K0 * base**a, a * K0 * base ** (a - 1.0), start=T0,
            K0=K0, K1=K1, a=a, q=q, R=R,
        )

    def rhs(self):
        p = self.p
        if self.kind == "zhou":
            c, g = self.c, self.floor_slope

            def f(s, y):
                u = max(y[0], 0.0)
                return np.array([y[1], -2.0 * y[1] + c * s ** (1.0 - p) * u**p + 2.0 * g])

        elif self.kind == "kato":
            k1, r, q = self.K1, self.R, self.q

            def f(t, y):
                u = max(y[0], 0.0)
                return np.array([y[1], k1 * (t + r) ** (-q) * u**p])

        else:
            c = self.c

            def f(t, y):
                u = max(y[0], 0.0)
                return np.array([y[1], c * u**p])

        return f

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "kind", "p", "U0", "U1", "start", "c", "floor_slope", "K0", "K1", "a", "q", "R", "epsilon"
        )}
        return out


@dataclass(frozen=True)
class BlowupReport:
    blew_up: bool
    t_detect: float
    t_extrapolated: float
    threshold: float
    steps: int
    rejected_steps: int
    mode: str = "horizon"
    extrapolated: bool = False
    final_value: float = math.nan
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "blew_up": self.blew_up,
            "t_detect": self.t_detect,
            "t_extrapolated": self.t_extrapolated,
            "threshold": self.threshold,
            "steps": self.steps,
            "rejected_steps": self.rejected_steps,
            "mode": self.mode,
            "extrapolated": self.extrapolated,
            "final_value": self.final_value,
            "notes": list(self.notes),
        }


def _extrapolation_window(ts, us, min_steps=EXTRAPOLATION_STEPS):
    """Last accepted steps: at least ``min_steps`` and at least one decade of growth."""
    if len(ts) < min_steps:
        return None
    k = min_steps
    while k <= len(ts):
        if us[-1] >= 10.0 * us[-k] and us[-k] > 0:
            return ts[-k:], us[-k:]
        k += 1
    return None


def pole_report(result, threshold, alpha=None, min_steps=EXTRAPOLATION_STEPS, monitor_index=0):
    """Turn a stepper result into a :class:`BlowupReport`."""
    blew = result.status in (THRESHOLD, STEP_COLLAPSE, NONFINITE)
    t_detect = result.t
    notes = []
    t_ext = t_detect
    extrapolated = False
    if blew:
        ts = np.array([h[0] for h in result.history])
        us = np.array([h[1] if np.ndim(h[1]) == 0 else abs(h[1][monitor_index]) for h in result.history])
        window = _extrapolation_window(ts, us, min_steps)
        if window is None:
            notes.append("too few steps spanning a decade; t_extrapolated = t_detect")
        else:
            est = extrapolate_pole(window[0], window[1], alpha=alpha)
            if math.isfinite(est) and est >= t_detect:
                t_ext = est
                extrapolated = True
            else:
                notes.append("extrapolated pole precedes t_detect; using t_detect")
        if alpha is not None:
            notes.append(f"extrapolation assumes (T-t)^(-{alpha:g}) growth (heuristic)")
    final = float(np.max(np.abs(result.y[:1]))) if result.y.ndim else float(result.y)
    return BlowupReport(
        blew_up=blew,
        t_detect=float(t_detect),
        t_extrapolated=float(t_ext),
        threshold=threshold,
        steps=result.steps,
        rejected_steps=result.rejected,
        mode=result.status,
        extrapolated=extrapolated,
        final_value=final,
        notes=tuple(notes),
    )


def integrate(
    scenario: OdeScenario,
    horizon: float,
    rtol: float = 1e-10,
    atol: float = 1e-14,
    threshold: float = ODE_THRESHOLD,
) -> BlowupReport:
    """Integrate the scenario up to ``horizon`` (absolute time) and detect blow-up.

    Reaching the horizon is not an error: the report then has ``blew_up=False``.
    """
    if horizon <= scenario.start:
        raise DomainError("horizon must lie after the start time")
    y0 = np.array([scenario.U0, scenario.U1])
    res = dopri54(
        scenario.rhs(),
        scenario.start,
        y0,
        horizon,
        rtol=rtol,
        atol=atol,
        monitor=lambda y: abs(y[0]),
        threshold=threshold,
        step_floor=STEP_FLOOR,
        history=400,
        record=lambda t, y: abs(y[0]),
    )
    return pole_report(res, threshold)


def fixed_step_rk4(scenario: OdeScenario, h: float, horizon: float, threshold: float = ODE_THRESHOLD):
    """Classical RK4 with constant step; returns the first time ``|U|`` exceeds ``threshold``."""
    f = scenario.rhs()
    t = scenario.start
    y = np.array([scenario.U0, scenario.U1])
    while t < horizon:
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        if not np.all(np.isfinite(y)) or abs(y[0]) > threshold:
            return t
    return math.inf


@dataclass(frozen=True)
class ScalingTable:
    epsilons: tuple
    reports: tuple
    fit: FitResult | None
    excluded: tuple = ()


def lifespans(scenarios, horizon, **kw):
    return [integrate(sc, horizon, **kw) for sc in scenarios]


def zhou_lifespan_scaling(
    p: float,
    c: float,
    C: float,
    eps_grid,
    C_prime: float | None = None,
    horizon: float = 1e12,
    return_table: bool = False,
    **integrate_kw,
):
    """Fit ``log T_blow`` against ``log eps`` for the Zhou surrogate.

    The grid must span at least 1.5 decades. Runs that do not blow up before
    ``horizon`` are excluded from the fit with a warning. Extra keywords go to
    :func:`integrate`.
    """
    eps = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    if eps.size < 3 or math.log10(eps[0] / eps[-1]) < 1.5 - 1e-12:
        raise DomainError("eps grid must hold >= 3 values spanning at least 1.5 decades")
    reports = []
    for e in eps:
        sc = OdeScenario.zhou_eps(p, c, C, e, C_prime=C_prime)
        reports.append(integrate(sc, horizon, **integrate_kw))
    keep = [i for i, r in enumerate(reports) if r.blew_up]
    excluded = tuple(float(eps[i]) for i in range(len(eps)) if i not in keep)
    if excluded:
        log.warning("no blow-up before horizon for eps=%s; excluded from fit", excluded)
    fit = None
    if len(keep) >= 3:
        fit = fit_linear(
            np.log(eps[keep]), np.log([reports[i].t_extrapolated for i in keep])
        )
    table = ScalingTable(tuple(float(e) for e in eps), tuple(reports), fit, excluded)
    return table if return_table else fit


def kato_blows_up(p, a, q, K0, K1=1.0, R=1.0, T0=1.0, horizon=1e6) -> bool:
    return integrate(OdeScenario.kato(p, a, q, K0, K1, R, T0), horizon).blew_up


def kato_onset(p, a, q, K1=1.0, R=1.0, T0=1.0, horizon=1e6, bracket=(1e-3, 1e3), rel_tol=1e-2):
    """Bracket the smallest ``K0`` that blows up before ``horizon`` by bisection.

    Returns ``(lo, hi)`` with ``lo`` not blowing up and ``hi`` blowing up and
    ``hi/lo - 1 <= rel_tol``. Bisection is done in ``log K0``.
    """
    lo, hi = bracket
    if kato_blows_up(p, a, q, lo, K1, R, T0, horizon):
        raise DomainError(f"lower bracket K0={lo} already blows up")
    if not kato_blows_up(p, a, q, hi, K1, R, T0, horizon):
        raise DomainError(f"upper bracket K0={hi} does not blow up")
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if kato_blows_up(p, a, q, mid, K1, R, T0, horizon):
            hi = mid
        else:
            lo = mid
    return lo, hi


def exp_substitution_check(p: float, J, t_range=(1.0, 10.0), samples: int = 50, h: float = 1e-3):
    """Check the change of variables ``1 + t = e^tau`` on a trajectory ``J(t)``.

    ``J`` is a callable of ``t`` (for sampled data pass a spline). With
    ``J0(tau) = J(e^tau - 1)`` the identity

        (1+t)^2 J''(t) + 3(1+t) J'(t) = J0''(tau) + 2 J0'(tau)

    is evaluated with independent fourth-order differences on both sides; the
    first-derivative relation ``J0' = (1+t) J'`` is checked alongside. The
    report also lists, as a diagnostic, the smallest ratio of the left side to
    ``J0^p tau^(1-p)``.
    """
    d1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    d2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    offs = np.arange(-2, 3)
    ts = np.linspace(t_range[0], t_range[1], samples)
    worst = 0.0
    scale = 0.0
    ratios = []
    for t in ts:
        jt = np.array([J(t + k * h) for k in offs])
        tau = math.log1p(t)
        j0 = np.array([J(math.expm1(tau + k * h)) for k in offs])
        jp, jpp = jt @ d1 / h, jt @ d2 / h**2
        j0p, j0pp = j0 @ d1 / h, j0 @ d2 / h**2
        lhs = (1 + t) ** 2 * jpp + 3 * (1 + t) * jp
        rhs = j0pp + 2 * j0p
        worst = max(worst, abs(lhs - rhs), abs(j0p - (1 + t) * jp))
        scale = max(scale, abs((1 + t) ** 2 * jpp), abs(3 * (1 + t) * jp), abs(j0pp), abs(2 * j0p))
        if jt[2] > 0 and tau > 0:
            ratios.append(lhs / (jt[2] ** p * tau ** (1 - p)))
    details = {"min_implied_constant": float(min(ratios)) if ratios else math.nan}
    return ResidualReport(float(worst), float(scale), samples, details)
