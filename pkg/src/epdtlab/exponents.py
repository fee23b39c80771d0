"""Model parameters and closed-form exponent algebra.

Everything here is a pure function of its arguments. Exponent comparisons use
an absolute tolerance of ``EXPONENT_TOL``; values closer than that are
reported as equal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import DomainError

EXPONENT_TOL = 1e-12


def delta_of(mu: float, nu: float) -> float:
    """Discriminant ``(mu - 1)**2 - 4 nu**2`` coupling damping and mass."""
    return (mu - 1.0) ** 2 - 4.0 * nu**2


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the semilinear equation

        u_tt - t^(2m) Lap u + (mu/t) u_t + (nu^2/t^2) u = |u|^p,  t >= 1,

    with data ``(eps*u0, eps*u1)`` supported in the ball of radius ``M``.
    """

    m: float = 0.0
    n: int = 3
    mu: float = 0.0
    nu: float = 0.0
    p: float = 2.0
    epsilon: float = 1.0
    M: float = 0.5
    delta: float = field(init=False)

    def __post_init__(self):
        if self.m < 0:
            raise DomainError(f"m must be nonnegative, got {self.m}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if self.mu < 0 or self.nu < 0:
            raise DomainError("mu and nu must be nonnegative")
        if self.p <= 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        if self.epsilon < 0:
            raise DomainError("epsilon must be nonnegative")
        if self.M <= 0:
            raise DomainError("M must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta", delta_of(self.mu, self.nu))

    @property
    def sqrt_delta(self) -> float:
        return math.sqrt(max(self.delta, 0.0))

    def with_(self, **changes) -> "ModelParams":
        changes.pop("delta", None)
        return replace(self, **changes)

    def require_positive_delta(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive here, got {self.delta}")

    def require_small_support(self):
        if not self.M < 1.0 / (self.m + 1.0):
            raise DomainError(
                f"support radius M={self.M} must be below 1/(m+1)={1 / (self.m + 1)}"
            )

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "mu": self.mu,
            "nu": self.nu,
            "p": self.p,
            "epsilon": self.epsilon,
            "M": self.M,
        }


@dataclass(frozen=True)
class CharacteristicSpeed:
    """Light-cone radius ``phi(t) = t^(m+1)/(m+1)``."""

    m: float

    def __call__(self, t):
        return t ** (self.m + 1.0) / (self.m + 1.0)

    def inverse(self, s):
        return ((self.m + 1.0) * s) ** (1.0 / (self.m + 1.0))


def phi(t, m: float):
    return t ** (m + 1.0) / (m + 1.0)


def _positive_root(a: float, b: float, c: float) -> float:
    """Positive root of ``a x^2 - b x - c = 0`` for ``a, c > 0``.

    Uses whichever of the two algebraically equivalent forms avoids
    cancellation between ``b`` and the square root.
    """
    disc = math.sqrt(b * b + 4.0 * a * c)
    if b >= 0:
        return (b + disc) / (2.0 * a)
    return 2.0 * c / (disc - b)


def strauss_quadratic(n: int, m: float, mu: float) -> tuple[float, float, float]:
    """Coefficients ``(A, B, C)`` of ``A p^2 - B p - C`` defining the Strauss exponent."""
    k = m + 1.0
    return k * n - 1.0 + mu, k * (n - 2) + 3.0 + mu, 2.0 * k


def strauss_exponent(n: int, m: float, mu: float = 0.0) -> float:
    """Strauss exponent ``p_S(n + mu/(m+1), m)``.

    Raises
    ------
    DomainError
        If the leading coefficient ``(m+1)n - 1 + mu`` is not positive (the
        exponent is then infinite, as for the one-dimensional wave equation).
    """
    a, b, c = strauss_quadratic(n, m, mu)
    if a <= 0:
        raise DomainError(
            f"leading coefficient (m+1)n-1+mu = {a} is not positive; no finite root"
        )
    return _positive_root(a, b, c)


def strauss_residual(p: float, n: int, m: float, mu: float) -> tuple[float, float]:
    """Polynomial value at ``p`` and the magnitude scale of its terms."""
    a, b, c = strauss_quadratic(n, m, mu)
    terms = (a * p * p, b * p, c)
    return terms[0] - terms[1] - terms[2], max(abs(x) for x in terms)


def fujita_exponent(shift: float) -> float:
    """``p_F(shift) = 1 + 2/shift``."""
    if shift <= 0:
        raise DomainError(f"Fujita shift must be positive, got {shift}")
    return 1.0 + 2.0 / shift


def fujita_shift(params: ModelParams) -> float:
    """Effective dimension ``(m+1)n + (mu - 1 - sqrt(delta))/2``."""
    return (params.m + 1.0) * params.n + (params.mu - 1.0 - params.sqrt_delta) / 2.0


def beta_q(q: float, params: ModelParams) -> float:
    if q <= 1:
        raise DomainError(f"q must exceed 1, got {q}")
    k = params.m + 1.0
    return (k * params.n - params.mu + 1.0) / 2.0 - k / q


@dataclass(frozen=True)
class BetaInterval:
    """The set ``(lo, hi)`` or ``[lo, hi)`` of admissible test-function indices."""

    lo: float
    hi: float
    lo_closed: bool = False

    @property
    def empty(self) -> bool:
        return not self.lo < self.hi

    def __contains__(self, beta: float) -> bool:
        if self.empty:
            return False
        above = beta >= self.lo if self.lo_closed else beta > self.lo
        return above and beta < self.hi

    def midpoint(self) -> float:
        if self.empty:
            raise DomainError("interval is empty")
        return 0.5 * (self.lo + self.hi)


def cone_interval(params: ModelParams) -> BetaInterval:
    """``((1 + sqrt(delta) - mu)/2, ((m+1)n - mu + 1)/2)`` without the damping cut."""
    if params.delta < 0:
        raise DomainError("delta must be nonnegative")
    k = params.m + 1.0
    return BetaInterval(
        (1.0 + params.sqrt_delta - params.mu) / 2.0, (k * params.n - params.mu + 1.0) / 2.0
    )


def admissible_beta_interval(params: ModelParams) -> BetaInterval:
    """Intersection of the cone interval with ``[1 - mu, inf)``."""
    base = cone_interval(params)
    cut = 1.0 - params.mu
    if cut > base.lo:
        return BetaInterval(cut, base.hi, lo_closed=True)
    return base


@dataclass(frozen=True)
class RegimeReport:
    delta_class: str
    dominant_exponent: str
    admissible: bool
    checks: dict = field(default_factory=dict)
    reasons: tuple[str, ...] = ()
    p_strauss: float = math.inf
    p_fujita: float = math.nan


def classify_delta(params: ModelParams) -> str:
    k = params.m + 1.0
    if params.delta < (k * params.n) ** 2:
        return "sub-wave"
    if params.delta >= (k * (params.n + 1)) ** 2:
        return "parabolic-like"
    return "intermediate"


def _compare(x: float, y: float, names=("p_S", "p_F")) -> str:
    if abs(x - y) <= EXPONENT_TOL:
        return "equal"
    return names[0] if x > y else names[1]


def gn_theta(p: float, n: int) -> tuple[float, bool]:
    """Interpolation exponent ``n(p-1)/(2p)`` and whether it lies in [0, 1]."""
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    theta = n * (p - 1.0) / (2.0 * p)
    return theta, 0.0 <= theta <= 1.0


def gn_power_ok(p: float, n: int) -> bool:
    """Local-existence range: ``1 < p <= n/(n-2)`` for ``n >= 3``, any ``p > 1`` otherwise."""
    if p <= 1:
        return False
    if n >= 3:
        return p <= n / (n - 2.0) + EXPONENT_TOL
    return True


def check_theorem2_hypotheses(params: ModelParams) -> RegimeReport:
    """Evaluate the lifespan theorem's hypotheses for ``params``.

    The theorem is stated at the critical power ``p = p_S``; the lower bound on
    ``p`` is therefore evaluated at ``p_S``. The local-existence condition on
    the power is evaluated at ``params.p``, the power a simulation would use.
    """
    k = params.m + 1.0
    n = params.n
    reasons = []
    try:
        ps = strauss_exponent(n, params.m, params.mu)
    except DomainError:
        ps = math.inf
    try:
        pf = fujita_exponent(fujita_shift(params)) if params.delta >= 0 else math.nan
    except DomainError:
        pf = math.inf

    checks = {}
    checks["delta_positive"] = params.delta > 0
    if not checks["delta_positive"]:
        reasons.append("delta must be positive")
    checks["delta_below_wave"] = params.delta < (k * n) ** 2
    if not checks["delta_below_wave"]:
        reasons.append("delta must be below (m+1)^2 n^2")
    denom = k * n - params.sqrt_delta
    checks["p_above_lower_bound"] = denom > 0 and ps > 2.0 * k / denom
    if not checks["p_above_lower_bound"]:
        reasons.append("p_S must exceed 2(m+1)/((m+1)n - sqrt(delta))")
    checks["n1_damping"] = n != 1 or params.mu >= params.m
    if not checks["n1_damping"]:
        reasons.append("n=1 requires mu>=m")
    checks["support_radius"] = params.M < 1.0 / k
    if not checks["support_radius"]:
        reasons.append("support radius M must be below 1/(m+1)")
    checks["gn_power"] = gn_power_ok(params.p, n)
    if not checks["gn_power"]:
        reasons.append(f"p={params.p} exceeds the local-existence bound n/(n-2)")

    dominant = _compare(ps, pf) if math.isfinite(pf) or math.isfinite(ps) else "equal"
    return RegimeReport(
        delta_class=classify_delta(params) if params.delta >= 0 else "negative-delta",
        dominant_exponent=dominant,
        admissible=all(checks.values()),
        checks=checks,
        reasons=tuple(reasons),
        p_strauss=ps,
        p_fujita=pf,
    )


def comparison_root(m: float) -> float:
    """Positive root ``a(m)`` of ``eta^2 - B eta + C = 0`` from the two-dimensional
    ``p_S`` versus ``p_F`` comparison at ``delta = 1``."""
    k = m + 1.0
    b = 8 * k**3 - 8 * k**2 + 2 * k - 1
    c = 8 * k - 8 * k**2 - 2
    disc = math.sqrt(b * b - 4.0 * c)
    # roots r1 >= r2 with r1*r2 = c; the larger one computed without cancellation
    r1 = (b + disc) / 2.0 if b >= 0 else 2.0 * c / (b - disc)
    r2 = c / r1
    if not (r1 > 0 and r2 < 0):
        raise ArithmeticError(f"expected one positive and one negative root, got {r1}, {r2}")
    return r1


@dataclass(frozen=True)
class Ordering:
    larger: str
    p_strauss: float
    p_fujita: float
    a_m: float | None = None
    crossover_mu: float | None = None


def crossover_mu(m: float) -> float:
    """Exact damping at which the two n=2 exponents coincide when ``delta = 1``.

    Substituting ``p_F`` into the Strauss quadratic leaves ``4D - 32k + 16``
    with ``D = 4k + mu - 2`` and ``k = m + 1``, so the root is ``mu = 4m + 2``.
    """
    return 4.0 * m + 2.0


def compare_ps_pf_delta1(n: int, m: float, mu: float) -> Ordering:
    """Compare ``p_S(n + mu/(m+1), m)`` with ``p_F((m+1)n + (mu-2)/2)``."""
    ps = strauss_exponent(n, m, mu)
    pf = fujita_exponent((m + 1.0) * n + (mu - 2.0) / 2.0)
    if n == 2:
        return Ordering(_compare(ps, pf), ps, pf, comparison_root(m), crossover_mu(m))
    return Ordering(_compare(ps, pf), ps, pf)


@dataclass(frozen=True)
class DecayPrediction:
    """``case`` is ``damping`` (rate set by the damping alone), ``borderline``
    (same rate with a ``sqrt(1 + log t)`` factor) or ``dispersive``."""

    case: str
    time_exponent: float
    has_log_factor: bool
    threshold: float


def decay_threshold(params: ModelParams) -> float:
    k = params.m + 1.0
    return params.sqrt_delta / (2.0 * k) + 0.5 - params.n / 2.0


def predicted_linear_decay(k: float, params: ModelParams) -> DecayPrediction:
    """Predicted power of ``t`` in the homogeneous Sobolev norm of order ``k``
    for the linear problem with data at ``t = 1``."""
    params.require_positive_delta()
    if not 0.0 <= k <= 1.0:
        raise DomainError(f"k must lie in [0, 1], got {k}")
    thr = decay_threshold(params)
    slow = -(params.mu + params.m) / 2.0
    if abs(k - thr) <= EXPONENT_TOL:
        return DecayPrediction("borderline", slow, True, thr)
    if k > thr:
        return DecayPrediction("damping", slow, False, thr)
    mk = params.m + 1.0
    expo = -mk * (k + params.n / 2.0) + (params.sqrt_delta - params.mu + 1.0) / 2.0
    return DecayPrediction("dispersive", expo, False, thr)
