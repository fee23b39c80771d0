import math

import numpy as np
import pytest
from scipy import integrate

from epdtlab.errors import DomainError
from epdtlab.exponents import ModelParams, admissible_beta_interval, phi
from epdtlab.special import Hyp2F1Params, gauss_2f1_at_one, sphere_area
from epdtlab.testfunctions import (
    TestFunctionSpec,
    cone_sample,
    conjugate_residual,
    hyp_params_for,
    hypergeometric_ode_residual,
    initial_functionals,
    lambda_band,
    lambda_residual,
    lambda_t,
    phi_beta,
    psi_bar_beta,
    psi_beta,
    psi_beta_prime,
    psi_prime_edge_exponent,
    psi_prime_edge_fit,
    radial_quadrature,
    spatial_weight,
)


def random_admissible(rng, count, edge_margin=None):
    """Random (params, beta) with nonempty admissible interval.

    With ``edge_margin`` set, beta is also placed where psi' is singular at
    z = 1 with predicted exponent at most ``-edge_margin``.
    """
    out = []
    while len(out) < count:
        prm = ModelParams(
            m=rng.uniform(0, 2), n=int(rng.integers(1, 5)), mu=rng.uniform(0, 4), nu=rng.uniform(0, 1)
        )
        if prm.delta <= 0:
            continue
        iv = admissible_beta_interval(prm)
        if iv.empty:
            continue
        lo, hi = iv.lo, iv.hi
        if edge_margin is not None:
            k = prm.m + 1
            lo = max(lo, (k * (prm.n - 2) - prm.mu + 1) / 2 + edge_margin * k)
        if not lo < hi:
            continue
        beta = rng.uniform(lo, hi) if math.isfinite(hi) else lo + rng.uniform(0.05, 2)
        if beta in iv:
            out.append(TestFunctionSpec(beta, prm))
    return out


def direct_series(a, b, c, z, terms=400):
    total, term = 0.0, 1.0
    for k in range(terms):
        total += term
        term *= (a + k) * (b + k) / ((k + 1) * (c + k)) * z
    return total


class TestSpec:
    def test_parameter_map(self, rng):
        for spec in random_admissible(rng, 20):
            h, prm = spec.hyp, spec.params
            k = prm.m + 1
            assert h.a - h.b == pytest.approx(prm.sqrt_delta / (2 * k), rel=1e-14)
            assert h.a + h.b == pytest.approx((2 * spec.beta + prm.mu - 1) / (2 * k), abs=1e-14)
            assert h.c == prm.n / 2

    def test_z_inside_cone(self, rng):
        t, r = cone_sample(0.7, 200, rng, frac=(0.0, 0.999))
        z = TestFunctionSpec.admissible(ModelParams(m=0.7, n=3, mu=3, nu=0.5)).z_of(t, r)
        assert np.all((z >= 0) & (z < 1))

    def test_admissible_rejects_outside(self):
        prm = ModelParams(m=0, n=3, mu=2, nu=0)
        with pytest.raises(DomainError):
            TestFunctionSpec.admissible(prm, beta=1.5)
        with pytest.raises(DomainError):
            TestFunctionSpec.admissible(ModelParams(n=2, mu=6))

    def test_requires_positive_delta(self):
        with pytest.raises(DomainError):
            hyp_params_for(1.0, ModelParams(mu=1, nu=0))


class TestPsi:
    def test_origin(self, rng):
        for spec in random_admissible(rng, 5):
            assert psi_beta(spec, 0.0) == 1.0
            h = spec.hyp
            assert psi_beta_prime(spec, 0.0) == pytest.approx(h.a * h.b / h.c, rel=1e-15)
            assert psi_bar_beta(spec, 0.0) == pytest.approx(2 * spec.beta + spec.params.mu - 2, abs=1e-14)

    def test_wave_case_direct_series(self):
        spec = TestFunctionSpec(1.5, ModelParams(m=0, n=3, mu=0, nu=0))
        h = spec.hyp
        assert psi_beta(spec, 0.5) == pytest.approx(direct_series(h.a, h.b, h.c, 0.5), abs=1e-10)

    def test_lower_bound_and_bounded(self, rng):
        z = np.append(np.round(np.arange(0, 1, 0.1), 1), 0.99)
        for spec in random_admissible(rng, 50):
            vals = psi_beta(spec, z)
            assert np.all(vals >= 1 - 1e-9)
            assert np.all(np.diff(vals) >= -1e-12)
            # bounded: the boundary value exists whenever the derivative is integrable at z = 1
            if spec.hyp.excess > 0:
                assert vals[-1] <= gauss_2f1_at_one(spec.hyp) * (1 + 1e-9)

    def test_derivative_positive_when_ab_positive(self, rng):
        z = np.linspace(0, 0.99, 30)
        for spec in random_admissible(rng, 30):
            prm = spec.params
            if spec.beta > (1 + prm.sqrt_delta - prm.mu) / 2 + 1e-9:
                assert np.all(psi_beta_prime(spec, z) > 0)

    def test_bar_composition(self, rng):
        z = rng.uniform(0, 0.95, 25)
        for spec in random_admissible(rng, 10):
            k = spec.params.m + 1
            hand = (2 * spec.beta + spec.params.mu - 2) * psi_beta(spec, z) + 4 * k * z * psi_beta_prime(spec, z)
            np.testing.assert_allclose(psi_bar_beta(spec, z), hand, rtol=1e-14, atol=1e-14)

    def test_bar_pure_derivative(self):
        spec = TestFunctionSpec(1.0, ModelParams(m=0.5, n=3, mu=0, nu=0.3))
        z = np.array([0.2, 0.6])
        np.testing.assert_allclose(psi_bar_beta(spec, z), 6 * z * psi_beta_prime(spec, z), rtol=1e-15)

    def test_edge_power(self, rng):
        for spec in random_admissible(rng, 10, edge_margin=0.1):
            predicted = psi_prime_edge_exponent(spec)
            fit = psi_prime_edge_fit(spec)
            assert abs(fit.exponent / predicted - 1) <= 0.05
            # log|psi'| - s log(1 - sqrt z) stays in a band on [0.9, 0.999]
            z = np.linspace(0.9, 0.999, 40)
            diff = np.log(np.abs(psi_beta_prime(spec, z))) - predicted * np.log(1 - np.sqrt(z))
            assert np.ptp(diff) < 2.0

    def test_ode_residual(self, rng):
        z = np.linspace(0, 0.99, 50)
        for spec in random_admissible(rng, 20):
            assert hypergeometric_ode_residual(spec, z).normalized <= 1e-8


class TestPhi:
    def test_trivial_values(self):
        spec = TestFunctionSpec.admissible(ModelParams(m=0.5, n=3, mu=3, nu=0.5))
        assert phi_beta(spec, 1.0, 0.0) == 1.0
        unit = TestFunctionSpec(1.0, ModelParams(m=0.5, n=3, mu=3, nu=0.5))
        assert np.all(phi_beta(unit, np.array([1.0, 3.0, 20.0]), 0.0) == 1.0)

    def test_composition(self):
        spec = TestFunctionSpec.admissible(ModelParams(m=1, n=2, mu=1.5, nu=0.2))
        t, r = 2.5, 1.1
        z = (2 * r) ** 2 / t**4
        assert phi_beta(spec, t, r) == pytest.approx(t ** (1 - spec.beta) * psi_beta(spec, z), rel=1e-14)

    def test_wave_case_map(self):
        prm = ModelParams(m=0, n=3, mu=0, nu=0)
        spec = TestFunctionSpec(1.5, prm)
        assert (spec.hyp.a, spec.hyp.b, spec.hyp.c) == pytest.approx(((3 - 1 + 1) / 4, (3 - 1 - 1) / 4, 1.5))
        t, r = 3.0, 1.5
        h = spec.hyp
        expected = t ** (-0.5) * direct_series(h.a, h.b, h.c, r**2 / t**2)
        assert phi_beta(spec, t, r) == pytest.approx(expected, rel=1e-12)

    def test_outside_cone(self):
        spec = TestFunctionSpec.admissible(ModelParams(m=0, n=3, mu=2))
        with pytest.raises(DomainError):
            phi_beta(spec, 2.0, 2.5)


class TestConjugateResidual:
    def test_admissible_specs(self, rng):
        for spec in random_admissible(rng, 10):
            t, r = cone_sample(spec.params.m, 100, rng)
            assert conjugate_residual(spec, t, r).normalized <= 1e-5

    def test_perturbed_control(self, rng):
        spec = random_admissible(rng, 1)[0]
        t, r = cone_sample(spec.params.m, 100, rng)
        h = spec.hyp
        bad = spec.with_hyp(Hyp2F1Params(h.a + 0.1, h.b, h.c))
        good = conjugate_residual(spec, t, r).normalized
        worse = conjugate_residual(bad, t, r).normalized
        assert worse > 1e-2
        assert worse >= 1e3 * good

    def test_domain(self):
        spec = TestFunctionSpec.admissible(ModelParams(m=0, n=3, mu=2))
        with pytest.raises(DomainError):
            conjugate_residual(spec, 2.0, 2.5)
        with pytest.raises(DomainError):
            conjugate_residual(spec, 0.5, 0.1)
        with pytest.raises(DomainError):
            conjugate_residual(spec, 2.0, 0.0)


class TestLambda:
    @pytest.mark.parametrize("t", [1.0, 2.0, 5.5, 10.0])
    def test_closed_form(self, t):
        assert lambda_t(0.0, t) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-t), rel=1e-11)

    @pytest.mark.parametrize("m", [0.0, 0.5, 1.0])
    def test_ode_residual(self, m):
        t = np.linspace(1.01, 10, 40)
        assert np.max(np.abs(lambda_residual(m, t))) <= 1e-4

    @pytest.mark.parametrize("m", [0.0, 0.5, 1.0])
    def test_band(self, m):
        band = lambda_band(m, np.linspace(1, 10, 60))
        assert np.all(band > 0)
        assert band.max() / band.min() <= 4.0

    def test_domain(self):
        with pytest.raises(DomainError):
            lambda_t(0.0, 0.5)


class TestWeights:
    def test_spatial_weight_positive_and_growing(self):
        w = spatial_weight(np.linspace(0, 5, 11), 3)
        assert np.all(w > 0) and np.all(np.diff(w) > 0)

    def test_ball_volume(self):
        for n in (1, 2, 3, 5):
            vol = radial_quadrature(lambda r: np.ones_like(r), 0.7, n)
            exact = math.exp(n / 2 * math.log(math.pi) - math.lgamma(n / 2 + 1)) * 0.7**n
            assert vol == pytest.approx(exact, rel=1e-13)


def bump(R):
    return lambda r: np.where(r < R, (1 - (r / R) ** 2) ** 4, 0.0)


class TestInitialFunctionals:
    def test_zero_data(self):
        spec = TestFunctionSpec.admissible(ModelParams(m=0, n=3, mu=3, nu=0.5, M=0.5))
        zero = lambda r: np.zeros_like(r)
        assert initial_functionals(spec, zero, zero) == (0.0, 0.0)

    def test_nonnegative(self, rng):
        for spec in random_admissible(rng, 20):
            prm = spec.params
            if spec.beta < 1 - prm.mu:
                continue
            R = 0.9 / (prm.m + 1)
            e0, e1 = initial_functionals(spec, bump(R), bump(R), support=R)
            assert e0 >= 0 and e1 >= 0

    def test_unit_weight_quadrature(self):
        prm = ModelParams(m=0, n=3, mu=1.5, nu=0.1, M=0.8)
        spec = TestFunctionSpec(1.0, prm).with_hyp(Hyp2F1Params(0.0, 0.4, 1.5))
        u0 = bump(0.8)
        e0, e1 = initial_functionals(spec, u0, u0)
        ref, _ = integrate.quad(lambda r: float(u0(r)) * r**2, 0, 0.8, epsabs=0, epsrel=1e-13)
        assert e0 == pytest.approx(sphere_area(3) * ref, rel=1e-10)
        # psi = 1, psi' = 0, beta + mu - 1 = 1.5, so E1 = int (u1 + 1.5 u0)
        assert e1 == pytest.approx(2.5 * sphere_area(3) * ref, rel=1e-10)

    def test_support_limit(self):
        spec = TestFunctionSpec.admissible(ModelParams(m=1, n=3, mu=3, nu=0.5, M=0.4))
        with pytest.raises(DomainError):
            initial_functionals(spec, bump(0.6), bump(0.6), support=0.6)
