"""Self-similar solutions of the adjoint equation and the Kato-type weight.

``Phi_beta(t, x) = t^(1-beta) psi_beta(z)`` with ``z = (m+1)^2 |x|^2 / t^(2(m+1))``
solves

    Phi_tt - t^(2m) Lap Phi - d/dt(mu Phi / t) + nu^2 Phi / t^2 = 0

inside the light cone when ``psi_beta = F(a, b; n/2; z)`` with the parameter
map implemented in :func:`hyp_params_for`. The residual checks below confirm
this by finite differences rather than by algebra.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError
from .exponents import ModelParams, admissible_beta_interval, phi
from .fitting import fit_linear
from .special import (
    Hyp2F1Params,
    bessel_k,
    gauss_2f1,
    gauss_2f1_derivative,
    gauss_2f1_second_derivative,
    hyp2f1_many,
    sphere_area,
    sphere_exp_integral,
)


def hyp_params_for(beta: float, params: ModelParams) -> Hyp2F1Params:
    """``a, b = (2 beta + mu - 1 +- sqrt(delta)) / (4(m+1))`` and ``c = n/2``."""
    params.require_positive_delta()
    k = params.m + 1.0
    base = 2.0 * beta + params.mu - 1.0
    return Hyp2F1Params(
        (base + params.sqrt_delta) / (4.0 * k),
        (base - params.sqrt_delta) / (4.0 * k),
        params.n / 2.0,
        source={"beta": beta, "mu": params.mu, "delta": params.delta, "m": params.m, "n": params.n},
    )


@dataclass(frozen=True)
class TestFunctionSpec:
    beta: float
    params: ModelParams
    hyp: Hyp2F1Params = field(default=None)

    # not a pytest test class
    __test__ = False

    def __post_init__(self):
        if self.hyp is None:
            object.__setattr__(self, "hyp", hyp_params_for(self.beta, self.params))

    @classmethod
    def admissible(cls, params: ModelParams, beta: float | None = None) -> "TestFunctionSpec":
        """Spec with ``beta`` in the admissible interval (its midpoint by default)."""
        interval = admissible_beta_interval(params)
        if interval.empty:
            raise DomainError("no admissible beta for these parameters")
        if beta is None:
            beta = interval.midpoint()
        elif beta not in interval:
            raise DomainError(f"beta={beta} outside admissible interval {interval}")
        return cls(beta, params)

    def z_of(self, t, r):
        k = self.params.m + 1.0
        return (k * np.asarray(r)) ** 2 / np.asarray(t) ** (2.0 * k)

    def with_hyp(self, hyp: Hyp2F1Params) -> "TestFunctionSpec":
        return TestFunctionSpec(self.beta, self.params, hyp)


@dataclass(frozen=True)
class ResidualReport:
    max_abs_residual: float
    scale: float
    sample_points: int
    details: dict = field(default_factory=dict)

    @property
    def normalized(self) -> float:
        if self.scale == 0.0:
            return 0.0 if self.max_abs_residual == 0.0 else math.inf
        return self.max_abs_residual / self.scale


def psi_beta(spec: TestFunctionSpec, z):
    if np.ndim(z) == 0:
        return gauss_2f1(spec.hyp, float(z)).value
    return hyp2f1_many(spec.hyp, z)


def psi_beta_prime(spec: TestFunctionSpec, z):
    if np.ndim(z) == 0:
        return gauss_2f1_derivative(spec.hyp, float(z))
    h = spec.hyp
    lead = h.a * h.b / h.c
    if lead == 0.0:
        return np.zeros(np.shape(z))
    return lead * hyp2f1_many(h.shifted(), z)


def psi_beta_second(spec: TestFunctionSpec, z):
    if np.ndim(z) == 0:
        return gauss_2f1_second_derivative(spec.hyp, float(z))
    h = spec.hyp
    lead = h.a * h.b * (h.a + 1) * (h.b + 1) / (h.c * (h.c + 1))
    if lead == 0.0:
        return np.zeros(np.shape(z))
    return lead * hyp2f1_many(h.shifted(2), z)


def psi_prime_edge_exponent(spec: TestFunctionSpec) -> float:
    """Predicted power of ``1 - sqrt(z)`` in ``|psi'_beta|`` as ``z -> 1``.

    Equals ``c - 1 - a - b`` for the shifted hypergeometric function; it is
    only the leading behaviour when negative.
    """
    k = spec.params.m + 1.0
    prm = spec.params
    return (k * (prm.n - 2) - prm.mu + 1.0 - 2.0 * spec.beta) / (2.0 * k)


@dataclass(frozen=True)
class EdgeFit:
    """``|psi'| ~ amplitude * x^exponent + offset`` with ``x = 1 - sqrt(z)``.

    ``loglog_slope`` is the naive slope, kept for comparison; it is biased
    by the regular branch when the exponent is small in magnitude.
    """

    exponent: float
    amplitude: float
    offset: float
    rel_rms: float
    loglog_slope: float


def psi_prime_edge_fit(spec: TestFunctionSpec, w_range=(1e-5, 1e-2), samples: int = 40) -> EdgeFit:
    """Fit the singular power of ``psi'_beta`` near ``z = 1``.

    ``1 - z`` is log-spaced over ``w_range``. For fixed exponent the model is
    linear in amplitude and offset, so only the exponent is searched.
    """
    w = np.geomspace(w_range[1], w_range[0], samples)
    z = 1.0 - w
    vals = np.abs(np.array([psi_beta_prime(spec, float(v)) for v in z]))
    if np.any(vals == 0.0):
        raise DomainError("psi' vanishes identically; no edge power to fit")
    x = -np.expm1(0.5 * np.log1p(-w))  # 1 - sqrt(z) without cancellation
    naive = fit_linear(np.log(x), np.log(vals))

    def solve(expo):
        basis = np.column_stack([x**expo, np.ones_like(x)]) / vals[:, None]
        coef, *_ = np.linalg.lstsq(basis, np.ones_like(x), rcond=None)
        resid = basis @ coef - 1.0
        return float(resid @ resid), coef

    lo, hi = naive.slope - 1.0, min(naive.slope + 1.0, -1e-3)
    best = optimize.minimize_scalar(lambda e: solve(e)[0], bounds=(lo, hi), method="bounded",
                                    options={"xatol": 1e-10})
    ssr, (amp, off) = solve(best.x)
    return EdgeFit(float(best.x), float(amp), float(off), math.sqrt(ssr / samples), naive.slope)


def psi_bar_beta(spec: TestFunctionSpec, z):
    """``(2 beta + mu - 2) psi + 4(m+1) z psi'``."""
    coef = 2.0 * spec.beta + spec.params.mu - 2.0
    k = spec.params.m + 1.0
    return coef * psi_beta(spec, z) + 4.0 * k * np.asarray(z) * psi_beta_prime(spec, z)


def _require_inside(spec, t, r):
    cone = phi(np.asarray(t, dtype=float), spec.params.m)
    if np.any(np.asarray(r) >= cone) or np.any(np.asarray(r) < 0):
        raise DomainError("point lies outside the light cone r < t^(m+1)/(m+1)")


def phi_beta(spec: TestFunctionSpec, t, r):
    """``t^(1-beta) psi_beta(z(t, r))`` for ``r < phi(t)``."""
    _require_inside(spec, t, r)
    z = spec.z_of(t, r)
    return np.asarray(t, dtype=float) ** (1.0 - spec.beta) * psi_beta(spec, z)


def hypergeometric_ode_residual(spec: TestFunctionSpec, z) -> ResidualReport:
    """Residual of ``z(1-z) psi'' + [c - (a+b+1) z] psi' - ab psi`` using the
    series derivatives."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    h = spec.hyp
    f0 = psi_beta(spec, z)
    f1 = psi_beta_prime(spec, z)
    f2 = psi_beta_second(spec, z)
    terms = np.stack([z * (1 - z) * f2, (h.c - (h.a + h.b + 1) * z) * f1, -h.a * h.b * f0])
    res = terms.sum(axis=0)
    return ResidualReport(float(np.max(np.abs(res))), float(np.max(np.abs(terms))), z.size)


_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.arange(-2, 3)
# one-sided fourth-order second derivative, for stencils that would cross t = 1
_D2_FWD = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0


def conjugate_residual(spec: TestFunctionSpec, t, r, h_max: float = 1e-3) -> ResidualReport:
    """Finite-difference residual of the adjoint equation at interior points.

    ``t`` and ``r`` are broadcast together; every point must satisfy
    ``0 < r < phi(t)``. Fourth-order centred stencils are used with step
    ``min(h_max, distance_to_cone / 8)`` (distance measured in the direction
    of each derivative). The residual is normalised by the largest individual
    term magnitude.
    """
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    t = t.ravel()
    r = r.ravel()
    prm = spec.params
    m = prm.m
    if np.any(t < 1.0):
        raise DomainError("t must be at least 1")
    if np.any(r <= 0.0):
        raise DomainError("radial points must be strictly positive")
    gap = phi(t, m) - r
    if np.any(gap <= 0):
        raise DomainError("point lies outside the light cone")
    speed = np.maximum(1.0, t**m)
    hr = np.minimum(h_max, np.minimum(gap / 8.0, r / 3.0))
    # moving t by h shrinks the cone by about t^m h
    ht = np.minimum(h_max, gap / (8.0 * speed))
    if np.any(hr < 1e-7) or np.any(ht < 1e-7):
        raise DomainError("point too close to the light cone for stable differencing")

    tt = t[:, None] + ht[:, None] * _OFFSETS
    rr = r[:, None] + hr[:, None] * _OFFSETS
    f_t = _phi_grid(spec, tt, np.repeat(r[:, None], 5, axis=1))
    f_r = _phi_grid(spec, np.repeat(t[:, None], 5, axis=1), rr)
    f0 = f_t[:, 2]

    d_tt = f_t @ _D2 / ht**2
    d_t = f_t @ _D1 / ht
    d_rr = f_r @ _D2 / hr**2
    d_r = f_r @ _D1 / hr

    lap = d_rr + (prm.n - 1) / r * d_r
    # d/dt (mu Phi / t) = mu Phi_t / t - mu Phi / t^2
    terms = np.stack(
        [
            d_tt,
            -(t ** (2 * m)) * d_rr,
            -(t ** (2 * m)) * (prm.n - 1) / r * d_r,
            -prm.mu * d_t / t,
            prm.mu * f0 / t**2,
            prm.nu**2 * f0 / t**2,
        ]
    )
    res = d_tt - t ** (2 * m) * lap - (prm.mu * d_t / t - prm.mu * f0 / t**2) + prm.nu**2 * f0 / t**2
    scale = np.max(np.abs(terms), axis=0)
    pointwise = np.abs(res) / np.where(scale > 0, scale, 1.0)
    return ResidualReport(
        float(np.max(np.abs(res))),
        float(np.max(scale)),
        t.size,
        details={"max_pointwise_normalized": float(np.max(pointwise))},
    )


def _phi_grid(spec, tt, rr):
    z = spec.z_of(tt, rr)
    vals = hyp2f1_many(spec.hyp, z.ravel()).reshape(z.shape)
    return tt ** (1.0 - spec.beta) * vals


def cone_sample(m: float, count: int, rng, t_range=(1.0, 4.0), frac=(0.05, 0.9)):
    """Random interior points ``(t, r)`` with ``r`` a fraction of ``phi(t)``."""
    t = rng.uniform(*t_range, size=count)
    r = rng.uniform(*frac, size=count) * phi(t, m)
    return t, r


def lambda_t(m: float, t):
    """``(m+1)^(-1/(2(m+1))) t^(1/2) K_{1/(2(m+1))}(t^(m+1)/(m+1))``, a decaying
    solution of ``lambda'' = t^(2m) lambda``."""
    k = m + 1.0
    order = 1.0 / (2.0 * k)
    pref = k ** (-order)

    def one(tv):
        if tv < 1.0:
            raise DomainError("lambda(t) is used for t >= 1")
        return pref * math.sqrt(tv) * bessel_k(order, tv**k / k)

    if np.ndim(t) == 0:
        return one(float(t))
    return np.array([one(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))


def lambda_residual(m: float, t, h: float = 1e-3) -> np.ndarray:
    """``(lambda'' - t^(2m) lambda) / |lambda|`` with a fourth-order stencil."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for i, tv in enumerate(t):
        if tv - 2 * h >= 1.0:
            vals = np.array([lambda_t(m, tv + j * h) for j in _OFFSETS])
            d2, here = vals @ _D2 / h**2, vals[2]
        else:
            vals = np.array([lambda_t(m, tv + j * h) for j in range(6)])
            d2, here = vals @ _D2_FWD / h**2, vals[0]
        out[i] = (d2 - tv ** (2 * m) * here) / abs(here)
    return out


def lambda_band(m: float, t) -> np.ndarray:
    """``lambda(t) t^(m/2) exp(phi(t))``; bounded above and below for t >= 1."""
    t = np.asarray(t, dtype=float)
    return lambda_t(m, t) * t ** (m / 2.0) * np.exp(phi(t, m))


def spatial_weight(r, n: int) -> np.ndarray:
    """``phi(x)`` of the Kato argument evaluated at radii ``r``."""
    return np.array([sphere_exp_integral(float(x), n) for x in np.ravel(r)]).reshape(np.shape(r))


def radial_quadrature(func, R: float, n: int, nodes: int = 64, panels: int = 1) -> float:
    """``int_{|x| < R} f(|x|) dx`` by composite Gauss-Legendre in the radius."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, R, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        rr = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * np.sum(w * func(rr) * rr ** (n - 1))
    return sphere_area(n) * total


def initial_functionals(spec: TestFunctionSpec, u0, u1, support: float | None = None):
    """Weighted data integrals ``(E0, E1)`` entering the integral identity.

    ``u0`` and ``u1`` are callables of the radius vanishing beyond ``support``
    (default ``spec.params.M``), which must be below ``1/(m+1)``.
    """
    prm = spec.params
    R = prm.M if support is None else support
    k = prm.m + 1.0
    if not R < 1.0 / k:
        raise DomainError(f"data support {R} must be below 1/(m+1)")

    def psi_at(rr):
        return psi_beta(spec, k**2 * rr**2)

    def dpsi_at(rr):
        return psi_beta_prime(spec, k**2 * rr**2)

    e0 = radial_quadrature(lambda rr: u0(rr) * psi_at(rr), R, prm.n)
    e1 = radial_quadrature(
        lambda rr: u1(rr) * psi_at(rr)
        + u0(rr) * (2.0 * k**3 * rr**2 * dpsi_at(rr) + (prm.mu + spec.beta - 1.0) * psi_at(rr)),
        R,
        prm.n,
    )
    return float(e0), float(e1)
