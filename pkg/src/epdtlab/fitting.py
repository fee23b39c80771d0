"""Least-squares line fits and pole extrapolation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
        }


def fit_linear(xs, ys) -> FitResult:
    """Ordinary least-squares line through ``(xs, ys)``.

    Raises
    ------
    DomainError
        On fewer than three points, non-finite input, or zero spread in ``xs``.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("xs and ys must be 1-D sequences of equal length")
    if x.size < 3:
        raise DomainError("need at least three points for a line fit")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite values in fit input")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx <= 1e-300 * max(1.0, float(np.sum(x**2))):
        raise DomainError("xs have no spread; slope undefined")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return FitResult(slope, intercept, r2, int(x.size))


def extrapolate_pole(ts, us, alpha: float | None = None) -> float:
    """Estimate ``T`` assuming ``u(t) ~ A (T - t)^(-alpha)`` near the end of the data.

    With ``alpha`` known, ``u^(-1/alpha)`` is linear in ``t`` and its root is
    returned. Otherwise ``log u`` is regressed on ``log(T - t)`` and ``T`` is
    chosen to minimise the residual.
    """
    t = np.asarray(ts, dtype=float)
    u = np.abs(np.asarray(us, dtype=float))
    if t.size < 3:
        raise DomainError("need at least three samples to extrapolate")
    if alpha is not None:
        fit = fit_linear(t, u ** (-1.0 / alpha))
        if fit.slope >= 0:
            return math.nan
        return -fit.intercept / fit.slope
    t_last = t[-1]
    span = t_last - t[0]
    logu = np.log(u)

    def ssr(log_gap):
        gap = math.exp(log_gap)
        x = np.log(t_last + gap - t)
        if not np.all(np.isfinite(x)):
            return math.inf
        coeffs = np.polyfit(x, logu, 1)
        return float(np.sum((np.polyval(coeffs, x) - logu) ** 2))

    # gaps below a few ulps of t_last are indistinguishable from zero
    floor = 64.0 * np.finfo(float).eps * max(abs(t_last), 1.0)
    lo = math.log(max(span * 1e-8, floor))
    hi = math.log(max(span, 1e-300) * 10.0)
    grid = np.linspace(lo, hi, 121)
    vals = [ssr(g) for g in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(ssr, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
    return float(t_last + math.exp(res.x))
