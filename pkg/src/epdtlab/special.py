"""Special functions: log-Gamma, Pochhammer symbols, the Gauss function 2F1 on
[0, 1), the Macdonald function K_l and the spherical exponential average.

Only the real line is supported. 2F1 is evaluated by its power series, or by
the connection formula to ``1 - z`` when ``z`` is close to 1; every evaluation
returns a :class:`SeriesEvalReport` carrying an estimate of what was left out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, TruncationError

DIRECT_SERIES = "direct_series"
NEAR_ONE_TRANSFORM = "near_one_transform"
BOUNDARY_FORMULA = "boundary_formula"

# beyond this z the 1 - z connection formula is used when it is well conditioned
_NEAR_ONE_SWITCH = 0.9
_MIN_INTEGER_GAP = 0.05
_CHUNK = 2048


def log_gamma(x: float) -> float:
    """``ln Gamma(x)`` for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def rgamma(x: float) -> float:
    """``1/Gamma(x)``, zero at the poles of Gamma."""
    if _is_nonpositive_integer(x):
        return 0.0
    sign = 1.0
    if x < 0 and math.floor(x) % 2 == 1:
        sign = -1.0
    return sign * math.exp(-math.lgamma(x))


def gamma_signed(x: float) -> float:
    if _is_nonpositive_integer(x):
        raise DomainError(f"Gamma has a pole at {x}")
    sign = -1.0 if (x < 0 and math.floor(x) % 2 == 1) else 1.0
    return sign * math.exp(math.lgamma(x))


def pochhammer(d: float, k: int) -> float:
    """Rising factorial ``(d)_k = d (d+1) ... (d+k-1)``, with ``(d)_0 = 1``."""
    if k < 0 or int(k) != k:
        raise DomainError(f"k must be a nonnegative integer, got {k}")
    k = int(k)
    if k == 0:
        return 1.0
    if k <= 30:
        out = 1.0
        for j in range(k):
            out *= d + j
        return out
    factors = d + np.arange(k, dtype=float)
    if np.any(factors == 0):
        return 0.0
    negatives = int(np.count_nonzero(factors < 0))
    sign = -1.0 if negatives % 2 else 1.0
    return sign * math.exp(float(np.sum(np.log(np.abs(factors)))))


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere ``S^(n-1)`` in ``R^n`` (2 for n = 1)."""
    if n < 1:
        raise DomainError("dimension must be positive")
    return 2.0 * math.pi ** (n / 2.0) / math.exp(log_gamma(n / 2.0))


@dataclass(frozen=True)
class Hyp2F1Params:
    a: float
    b: float
    c: float
    source: dict | None = None

    def __post_init__(self):
        if _is_nonpositive_integer(self.c):
            raise DomainError(f"c={self.c} is a nonpositive integer")

    @property
    def excess(self) -> float:
        """``c - a - b``, which governs the behaviour at ``z = 1``."""
        return self.c - self.a - self.b

    def shifted(self, k: int = 1) -> "Hyp2F1Params":
        return Hyp2F1Params(self.a + k, self.b + k, self.c + k)

    def terminates(self) -> bool:
        return _is_nonpositive_integer(self.a) or _is_nonpositive_integer(self.b)


@dataclass(frozen=True)
class SeriesEvalReport:
    value: float
    terms_used: int
    truncation_bound: float
    method: str


def _series(a, b, c, z, tol, max_terms):
    """Sum the hypergeometric series, returning ``(value, terms, bound)``.

    The tail after term K is bounded by ``|t_K| rho/(1 - rho)`` with ``rho`` the
    supremum of the remaining term ratios; once ``K`` exceeds the parameters the
    ratios are monotone in ``K`` and tend to ``z``.
    """
    if z == 0.0:
        return 1.0, 1, 0.0
    term = 1.0
    total = 1.0
    k0 = 0
    tail_start = 2.0 * (abs(a) + abs(b) + abs(c)) + 4.0
    while k0 < max_terms:
        ks = k0 + np.arange(_CHUNK, dtype=float)
        ratios = (a + ks) * (b + ks) / ((ks + 1.0) * (c + ks)) * z
        terms = term * np.cumprod(ratios)
        zero = np.flatnonzero(terms == 0.0)
        if zero.size:
            # terminating series: exact after the first vanishing term
            cut = zero[0]
            total += float(np.sum(terms[:cut]))
            return total, int(k0 + cut + 1), 0.0
        partial = total + np.cumsum(terms)
        # ratio bound for the tail following term index k0+j+1
        nxt_k = ks + 1.0
        nxt_r = np.abs((a + nxt_k) * (b + nxt_k) / ((nxt_k + 1.0) * (c + nxt_k)) * z)
        rho = np.maximum(nxt_r, abs(z))
        with np.errstate(divide="ignore", invalid="ignore"):
            bounds = np.where(rho < 1.0, np.abs(terms) * rho / (1.0 - rho), np.inf)
        ok = (ks + 1.0 > tail_start) & (bounds <= tol * np.maximum(np.abs(partial), 1e-300))
        hit = np.flatnonzero(ok)
        if hit.size:
            j = hit[0]
            return float(partial[j]), int(k0 + j + 2), float(bounds[j])
        if not np.all(np.isfinite(partial)):
            raise TruncationError("hypergeometric series overflowed", float(total), math.inf)
        total = float(partial[-1])
        term = float(terms[-1])
        k0 += _CHUNK
    raise TruncationError(
        f"2F1 series did not converge in {max_terms} terms at z={z}",
        total,
        float(bounds[-1]),
    )


def gauss_2f1(
    params: Hyp2F1Params,
    z: float,
    tol: float = 1e-13,
    max_terms: int | None = None,
    method: str = "auto",
) -> SeriesEvalReport:
    """Evaluate ``F(a, b; c; z)`` for ``z`` in ``[0, 1)``.

    ``method="series"`` forces the plain power series at every ``z``. The
    default term budget grows like ``1/(1-z)``, which is how slowly the
    series converges near the boundary.

    Raises
    ------
    TruncationError
        If the series cannot be summed to ``tol`` within ``max_terms`` terms.
    """
    if not 0.0 <= z < 1.0:
        raise DomainError(f"z must lie in [0, 1), got {z}")
    a, b, c = params.a, params.b, params.c
    if z == 0.0:
        return SeriesEvalReport(1.0, 1, 0.0, DIRECT_SERIES)
    if max_terms is None:
        max_terms = int(min(5e7, max(4e5, 100.0 / (1.0 - z))))
    excess = params.excess
    gap = abs(excess - round(excess))
    use_transform = (
        method == "auto"
        and z > _NEAR_ONE_SWITCH
        and not params.terminates()
        and gap >= _MIN_INTEGER_GAP
    )
    if use_transform:
        return _near_one(a, b, c, z, tol, max_terms)
    value, terms, bound = _series(a, b, c, z, tol, max_terms)
    return SeriesEvalReport(value, terms, bound, DIRECT_SERIES)


def _near_one(a, b, c, z, tol, max_terms):
    # F(a,b;c;z) = A F(a,b;a+b-c+1;1-z) + (1-z)^(c-a-b) B F(c-a,c-b;c-a-b+1;1-z)
    w = 1.0 - z
    s = c - a - b
    gc = gamma_signed(c)
    coef1 = gc * gamma_signed(s) * rgamma(c - a) * rgamma(c - b)
    coef2 = gc * gamma_signed(-s) * rgamma(a) * rgamma(b) * w**s
    v1 = t1 = b1 = 0.0
    v2 = t2 = b2 = 0.0
    if coef1 != 0.0:
        v1, t1, b1 = _series(a, b, 1.0 - s, w, tol, max_terms)
    if coef2 != 0.0:
        v2, t2, b2 = _series(c - a, c - b, 1.0 + s, w, tol, max_terms)
    value = coef1 * v1 + coef2 * v2
    bound = abs(coef1) * b1 + abs(coef2) * b2
    return SeriesEvalReport(value, max(t1 + t2, 1), bound, NEAR_ONE_TRANSFORM)


def gauss_2f1_value(a: float, b: float, c: float, z: float) -> float:
    return gauss_2f1(Hyp2F1Params(a, b, c), z).value


def _coefficients(a, b, c, zmax, tol, max_terms=200_000):
    """Taylor coefficients of 2F1 up to the order where the tail at ``zmax``
    falls below ``tol`` times the leading coefficient."""
    coefs = [1.0]
    tail_start = 2.0 * (abs(a) + abs(b) + abs(c)) + 4.0
    k = 0
    while k < max_terms:
        r = (a + k) * (b + k) / ((k + 1.0) * (c + k))
        nxt = coefs[-1] * r
        coefs.append(nxt)
        k += 1
        if nxt == 0.0:
            break
        rk = abs((a + k) * (b + k) / ((k + 1.0) * (c + k))) * zmax
        rho = max(rk, zmax)
        if k > tail_start and rho < 1.0:
            bound = abs(nxt) * zmax**k * rho / (1.0 - rho)
            if bound <= tol:
                break
    else:
        raise TruncationError(f"coefficient table did not converge for zmax={zmax}")
    return np.asarray(coefs)


def hyp2f1_many(params: Hyp2F1Params, z, tol: float = 1e-14) -> np.ndarray:
    """Vectorised ``F(a,b;c;z)`` on an array of ``z`` in ``[0, 1)``.

    Shares the series/connection split of :func:`gauss_2f1` but evaluates each
    branch as one polynomial in ``z`` (or ``1 - z``).
    """
    z = np.asarray(z, dtype=float)
    if z.size and (z.min() < 0.0 or z.max() >= 1.0):
        raise DomainError("z must lie in [0, 1)")
    a, b, c = params.a, params.b, params.c
    out = np.empty_like(z)
    excess = params.excess
    gap = abs(excess - round(excess))
    transform_ok = not params.terminates() and gap >= _MIN_INTEGER_GAP
    high = z > _NEAR_ONE_SWITCH
    near = high & transform_ok
    slow = high & (not transform_ok) & (not params.terminates())
    low = ~(near | slow)
    if np.any(slow):
        out[slow] = [gauss_2f1(params, float(x), tol=tol).value for x in z[slow]]
    if np.any(low):
        zl = z[low]
        coefs = _coefficients(a, b, c, float(zl.max()), tol)
        out[low] = np.polynomial.polynomial.polyval(zl, coefs)
    if np.any(near):
        w = 1.0 - z[near]
        wmax = float(w.max())
        s = excess
        gc = gamma_signed(c)
        coef1 = gc * gamma_signed(s) * rgamma(c - a) * rgamma(c - b)
        coef2 = gc * gamma_signed(-s) * rgamma(a) * rgamma(b)
        val = np.zeros_like(w)
        if coef1 != 0.0:
            val += coef1 * np.polynomial.polynomial.polyval(w, _coefficients(a, b, 1.0 - s, wmax, tol))
        if coef2 != 0.0:
            val += coef2 * w**s * np.polynomial.polynomial.polyval(
                w, _coefficients(c - a, c - b, 1.0 + s, wmax, tol)
            )
        out[near] = val
    return out


def gauss_2f1_at_one(params: Hyp2F1Params) -> float:
    """Boundary value ``Gamma(c)Gamma(c-a-b) / (Gamma(c-a)Gamma(c-b))``.

    Raises
    ------
    DomainError
        If ``c - a - b <= 0``, where the series diverges at ``z = 1``.
    """
    s = params.excess
    if not s > 0:
        raise DomainError(f"c-a-b = {s} must be positive for a finite value at z=1")
    return (
        gamma_signed(params.c)
        * gamma_signed(s)
        * rgamma(params.c - params.a)
        * rgamma(params.c - params.b)
    )


def gauss_2f1_derivative(params: Hyp2F1Params, z: float, tol: float = 1e-13) -> float:
    """``d/dz F(a,b;c;z) = (ab/c) F(a+1, b+1; c+1; z)``."""
    lead = params.a * params.b / params.c
    if lead == 0.0:
        if not 0.0 <= z < 1.0:
            raise DomainError(f"z must lie in [0, 1), got {z}")
        return 0.0
    return lead * gauss_2f1(params.shifted(), z, tol=tol).value


def gauss_2f1_second_derivative(params: Hyp2F1Params, z: float, tol: float = 1e-13) -> float:
    a, b, c = params.a, params.b, params.c
    lead = a * b * (a + 1) * (b + 1) / (c * (c + 1))
    if lead == 0.0:
        return 0.0
    return lead * gauss_2f1(params.shifted(2), z, tol=tol).value


def _bessel_cutoff(l: float, z: float, floor: float = 46.0) -> float:
    # smallest Y with z (cosh Y - 1) - |l| Y >= floor, i.e. integrand below e^-46 ~ 1e-20
    y = math.acosh(1.0 + floor / z)
    for _ in range(50):
        nxt = math.acosh(1.0 + (floor + abs(l) * y) / z)
        if abs(nxt - y) < 1e-12:
            break
        y = nxt
    return y


def bessel_k(l: float, z: float) -> float:
    """Macdonald function ``K_l(z) = int_0^inf exp(-z cosh y) cosh(l y) dy``.

    The integral is evaluated as ``exp(-z) * int_0^Y exp(-2 z sinh(y/2)^2) cosh(l y) dy``
    with ``Y`` chosen so the discarded integrand is below ``1e-20`` relative to
    the peak.
    """
    if not z > 0:
        raise DomainError(f"K_l needs z > 0, got {z}")
    upper = _bessel_cutoff(l, z)

    def integrand(y):
        sh = math.sinh(0.5 * y)
        return math.exp(-2.0 * z * sh * sh) * math.cosh(l * y)

    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=400)
    return math.exp(-z) * val


def sphere_exp_integral(x_norm: float, n: int) -> float:
    """``int_{S^(n-1)} exp(x . omega) d omega`` as a function of ``|x|``.

    For ``n = 1`` the sphere is ``{-1, 1}`` and the value is ``e^x + e^-x``;
    otherwise the integral is reduced to the polar angle.
    """
    if n < 1:
        raise DomainError("dimension must be positive")
    x = float(x_norm)
    if n == 1:
        return math.exp(x) + math.exp(-x)
    ring = sphere_area(n - 1)
    # factor out exp(x) so the integrand stays in [0, 1]
    power = n - 2

    def integrand(theta):
        return math.exp(x * (math.cos(theta) - 1.0)) * math.sin(theta) ** power

    val, _ = integrate.quad(integrand, 0.0, math.pi, epsabs=0.0, epsrel=1e-12, limit=200)
    return ring * math.exp(x) * val
