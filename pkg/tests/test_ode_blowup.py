import math

import numpy as np
import pytest
from scipy.interpolate import make_interp_spline

from epdtlab.errors import DomainError
from epdtlab.integrate import dopri54
from epdtlab.ode_blowup import (
    OdeScenario,
    exp_substitution_check,
    fixed_step_rk4,
    integrate,
    kato_blows_up,
    kato_onset,
    zhou_lifespan_scaling,
)


def exact_pole(p=2.0, c=1.0, T=3.0):
    """u'' = c u^p has the solution A (T - t)^(-2/(p-1)) with A^(p-1) = 2(p+1)/(c (p-1)^2)."""
    al = 2 / (p - 1)
    A = (2 * (p + 1) / (c * (p - 1) ** 2)) ** (1 / (p - 1))
    return OdeScenario("power", p, A * T**-al, al * A * T ** (-al - 1), start=0.0, c=c)


class TestScenario:
    def test_zhou_data(self):
        sc = OdeScenario.zhou_eps(2.0, 1.0, 3.0, 0.1, C_prime=2.0, s0=2.0)
        assert sc.U0 == pytest.approx(3 * 0.01 * 2)
        assert sc.U1 == pytest.approx(0.02) and sc.floor_slope == pytest.approx(0.02)

    def test_kato_data(self):
        sc = OdeScenario.kato(2, 1, 3, K0=0.5, R=1.0, T0=1.0)
        assert (sc.U0, sc.U1) == (1.0, 0.5)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(kind="other", p=2, U0=1, U1=0),
            dict(kind="power", p=1, U0=1, U1=0),
            dict(kind="zhou", p=2, U0=1, U1=0, start=0.0),
            dict(kind="kato", p=2, U0=1, U1=0, a=1, q=2.5),
            dict(kind="kato", p=3, U0=1, U1=0, a=0.5, q=3),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            OdeScenario(**kw)

    def test_zhou_floor_holds(self):
        sc = OdeScenario.zhou_eps(2.0, 1.0, 1.0, 0.3)
        times = np.linspace(1.5, 30, 40)
        r = dopri54(sc.rhs(), sc.start, [sc.U0, sc.U1], 30.0, rtol=1e-10, atol=1e-14, output_times=times)
        for t, y in r.outputs:
            assert y[1] >= sc.floor_slope * (1 - 1e-12)
            assert y[0] >= sc.U0 * t * (1 - 1e-12)


class TestPole:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_exact_pole(self, p):
        rep = integrate(exact_pole(p=p), 10.0)
        assert rep.blew_up and rep.extrapolated
        assert rep.t_detect < 3.0
        assert rep.t_extrapolated == pytest.approx(3.0, abs=1e-6)

    def test_horizon_not_an_error(self):
        rep = integrate(OdeScenario.kato(2, 1, 3, K0=1e-3), 50.0)
        assert not rep.blew_up and rep.t_detect == 50.0

    def test_horizon_before_start(self):
        with pytest.raises(DomainError):
            integrate(exact_pole(), -1.0)

    def test_fixed_step_threshold_time(self):
        # A = 6 for p = 2, so 6 (T - t)^-2 reaches 1e6 at T - sqrt(6e-6)
        crossing = 3.0 - math.sqrt(6e-6)
        for h in (2e-3, 1e-3, 5e-4):
            t_hit = fixed_step_rk4(exact_pole(), h, 10.0, threshold=1e6)
            assert crossing <= t_hit + 1e-12 <= crossing + h + 1e-12

    def test_adaptive_threshold_time(self):
        rep = integrate(exact_pole(), 10.0, threshold=1e6)
        crossing = 3.0 - math.sqrt(6e-6)
        assert 0 <= rep.t_detect - crossing < 1e-4


class TestZhou:
    @pytest.mark.parametrize("p", [1.5, 2.0])
    def test_monotone_and_scaling(self, p):
        eps = np.geomspace(0.3, 0.3 / 10**1.5, 5)
        table = zhou_lifespan_scaling(p, 1.0, 1.0, eps, return_table=True)
        ts = [r.t_extrapolated for r in table.reports]
        assert all(b > a for a, b in zip(ts, ts[1:]))
        assert table.fit.slope < 0 and table.fit.r_squared >= 0.98
        assert abs(table.fit.slope / (-p * (p - 1)) - 1) <= 0.15

    def test_grid_too_narrow(self):
        with pytest.raises(DomainError):
            zhou_lifespan_scaling(2.0, 1.0, 1.0, [0.3, 0.2, 0.1])

    def test_horizon_exclusion(self):
        table = zhou_lifespan_scaling(2.0, 1.0, 1.0, np.geomspace(0.3, 0.003, 5), horizon=200.0, return_table=True)
        assert table.excluded
        assert all(not r.blew_up for r, e in zip(table.reports, table.epsilons) if e in table.excluded)


class TestKato:
    def test_onset(self):
        lo, hi = kato_onset(2, 1, 3, horizon=1e4)
        assert hi / lo - 1 <= 1e-2
        assert not kato_blows_up(2, 1, 3, lo, horizon=1e4)
        assert kato_blows_up(2, 1, 3, hi, horizon=1e4)
        for k0 in hi * np.array([1.5, 3, 10, 100]):
            assert kato_blows_up(2, 1, 3, k0, horizon=1e4)

    def test_bad_bracket(self):
        with pytest.raises(DomainError):
            kato_onset(2, 1, 3, horizon=1e4, bracket=(1.0, 1e3))


class TestSubstitution:
    def test_analytic(self):
        rep = exp_substitution_check(2.0, lambda t: t**2 + math.sin(t))
        assert rep.normalized <= 1e-7

    def test_sampled_spline(self):
        t = np.linspace(0.5, 11, 400)
        spl = make_interp_spline(t, np.exp(0.3 * t) + t, k=5)
        rep = exp_substitution_check(2.0, lambda x: float(spl(x)))
        assert rep.normalized <= 1e-6

    def test_detects_wrong_map(self):
        # a function of t only cannot satisfy the identity if the map is broken; perturb J between calls
        calls = {"n": 0}

        def J(t):
            calls["n"] += 1
            return t**2 + (1e-3 if calls["n"] % 2 else 0.0)

        assert exp_substitution_check(2.0, J).normalized > 1e-3
