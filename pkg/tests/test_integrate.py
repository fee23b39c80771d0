import math

import numpy as np
import pytest

from epdtlab.errors import DomainError
from epdtlab.fitting import extrapolate_pole, fit_linear
from epdtlab.integrate import (
    COMPLETED,
    EMBEDDED_ORDER,
    NONFINITE,
    ORDER,
    THRESHOLD,
    dopri54,
)


class TestDopri:
    def test_exponential(self):
        r = dopri54(lambda t, y: -y, 0.0, [1.0], 4.0, rtol=1e-10, atol=1e-14)
        assert r.status == COMPLETED and not r.blew_up
        assert r.y[0] == pytest.approx(math.exp(-4.0), rel=1e-9)

    def test_oscillator_outputs_hit_exactly(self):
        outs = [0.5, 1.0, 2.5]
        r = dopri54(lambda t, y: np.array([y[1], -y[0]]), 0.0, [0.0, 1.0], 3.0, rtol=1e-10, atol=1e-12,
                    output_times=outs)
        assert [t for t, _ in r.outputs] == outs
        for t, y in r.outputs:
            assert y[0] == pytest.approx(math.sin(t), abs=1e-9)

    def test_tolerance_halving_order(self):
        # local error control per step gives global error ~ tol^(q/(q+1)) with q the embedded order
        errs = []
        for k in range(8):
            r = dopri54(lambda t, y: y, 0.0, [1.0], 5.0, rtol=1e-5 / 2**k, atol=1e-20)
            errs.append(abs(r.y[0] - math.exp(5.0)))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        assert math.exp(np.mean(np.log(ratios))) >= 2 ** (EMBEDDED_ORDER / ORDER)

    def test_threshold_stop(self):
        r = dopri54(lambda t, y: y**2, 0.0, [1.0], 2.0, rtol=1e-10, atol=1e-14,
                    monitor=lambda y: abs(y[0]), threshold=1e6, history=50)
        assert r.status == THRESHOLD and r.blew_up
        assert r.t < 1.0
        assert len(r.history) == 50

    def test_nonfinite(self):
        def f(t, y):
            return np.array([math.nan]) if t > 1.0 else -y
        r = dopri54(f, 0.0, [1.0], 3.0, max_step=0.1)
        assert r.status == NONFINITE

    def test_max_step_callable(self):
        r = dopri54(lambda t, y: np.zeros(1), 0.0, [1.0], 1.0, max_step=lambda t: 0.01)
        assert r.steps >= 100


class TestFitting:
    def test_exact_line(self):
        f = fit_linear([0, 1, 2, 3], [1, 3, 5, 7])
        assert (f.slope, f.intercept, f.r_squared, f.n_points) == pytest.approx((2, 1, 1, 4))

    def test_noisy(self, rng):
        x = np.linspace(0, 1, 200)
        f = fit_linear(x, -3 * x + 0.5 + 0.01 * rng.standard_normal(200))
        assert f.slope == pytest.approx(-3, abs=0.02)
        assert 0.99 < f.r_squared < 1

    @pytest.mark.parametrize("xs,ys", [([1, 2], [1, 2]), ([1, 1, 1], [0, 1, 2]), ([1, 2, np.inf], [1, 2, 3])])
    def test_rejects(self, xs, ys):
        with pytest.raises(DomainError):
            fit_linear(xs, ys)

    def test_pole_known_power(self):
        t = np.linspace(0, 1.9, 30)
        assert extrapolate_pole(t, 5 * (2 - t) ** -2.0, alpha=2.0) == pytest.approx(2.0, rel=1e-12)

    def test_pole_unknown_power(self):
        t = 7.0 - np.geomspace(1e-1, 1e-4, 20)
        assert extrapolate_pole(t, 0.3 * (7 - t) ** -1.5) == pytest.approx(7.0, abs=1e-7)

    def test_pole_tiny_gap(self):
        # last sample a few ulps before the pole must not crash
        t = 1e4 - np.geomspace(1e-2, 1e-11, 12)
        est = extrapolate_pole(t, (1e4 - t) ** -2.0)
        assert math.isfinite(est) and abs(est - 1e4) < 1e-6
