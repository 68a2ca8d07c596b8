import numpy as np
import pytest
from scipy.linalg import expm

from twistor.errors import OdeBlowUp, StepFailure
from twistor.numerics import OdeJet, central_diff, crop, rk4_linear, stencil_margin, steps_for


class TestCentralDiff:
    @pytest.mark.parametrize("order, exact, tol", [
        (1, np.cos, 1e-8),
        (2, lambda x: -np.sin(x), 1e-7),
        (3, lambda x: -np.cos(x), 1e-6),
        (4, np.sin, 1e-5),
    ])
    def test_sine_derivatives(self, order, exact, tol):
        h = 0.01
        x = np.arange(0, 1 + h / 2, h)
        d = central_diff(np.sin(x), h, order)
        m = stencil_margin(order)
        err = np.max(np.abs(crop(d, m, axes=(0,)) - exact(crop(x, m, axes=(0,)))))
        assert err < tol, f"{order} 阶差分误差过大: {err}"

    def test_edges_are_nan(self):
        d = central_diff(np.arange(10.0), 1.0, 1)
        assert np.isnan(d[:2]).all() and np.isnan(d[-2:]).all()
        assert np.allclose(d[2:-2], 1.0)

    def test_fourth_order_convergence(self):
        errors = []
        for h in (0.02, 0.01):
            x = np.arange(0, 1 + h / 2, h)
            d = central_diff(np.exp(x), h, 1)
            errors.append(np.nanmax(np.abs(d - np.exp(x))))
        assert 12 < errors[0] / errors[1] < 20, "不是四阶收敛"

    def test_axis_argument(self):
        x = np.linspace(0, 1, 21)
        grid = np.add.outer(x ** 2, np.zeros(5))
        d = central_diff(grid, x[1] - x[0], 1, axis=0)
        assert np.allclose(d[2:-2], 2 * x[2:-2, None])

    def test_too_short(self):
        assert np.isnan(central_diff(np.ones(4), 0.1, 1)).all()


def test_stencil_margin():
    assert stencil_margin(1) == 2
    assert stencil_margin(2) == 2
    assert stencil_margin(3) == 3
    assert stencil_margin(4) == 4


def test_steps_for():
    assert steps_for(1.0, 0.1) == 10
    assert steps_for(0.0, 0.1) == 0
    assert steps_for(-0.25, 0.1) == 3


class TestRk4Linear:
    def test_constant_coefficients_match_expm(self):
        A = np.array([[0, 1, 0, 0], [0, 0, -1j, 0], [0.5, 0, 0, 1], [0, 0.5, 0, 0]], dtype=complex)
        y = rk4_linear(lambda t: A, np.eye(4), 0.0, 1.0, 200)
        assert np.max(np.abs(y - expm(A))) < 1e-10

    def test_zero_length(self):
        y0 = np.eye(2)
        assert np.array_equal(rk4_linear(lambda t: np.zeros((2, 2)), y0, 0.3, 0.3, 10), y0)

    def test_non_finite_raises(self):
        with pytest.raises(StepFailure):
            rk4_linear(lambda t: np.array([[np.inf]]), np.ones((1, 1)), 0.0, 1.0, 3)


class TestOdeJet:
    @pytest.fixture(scope="class")
    def oscillator(self):
        # ψ'' = -ψ, ψ(0) = 0, ψ'(0) = 1
        return OdeJet(lambda y, dy, t: -y, 0.0, 0.0, 1.0, -1.0, 2.0, step=1e-3,
                      reduce=lambda order, y, dy, t: (-dy if order == 3 else y))

    def test_values(self, oscillator):
        t = np.linspace(-1, 2, 31)
        assert np.max(np.abs(oscillator(t) - np.sin(t))) < 1e-10
        assert np.max(np.abs(oscillator(t, 1) - np.cos(t))) < 1e-10

    def test_reduced_orders(self, oscillator):
        t = np.linspace(-0.5, 1.5, 11)
        assert np.allclose(oscillator(t, 2), -np.sin(t), atol=1e-10)
        assert np.allclose(oscillator(t, 3), -np.cos(t), atol=1e-10)
        assert np.allclose(oscillator(t, 4), np.sin(t), atol=1e-10)

    def test_outside_range(self, oscillator):
        with pytest.raises(OdeBlowUp):
            oscillator(2.5)

    def test_blow_up(self):
        # ψ'' = ψ² 在有限时间爆破
        with pytest.raises(OdeBlowUp):
            OdeJet(lambda y, dy, t: y ** 2, 0.0, 1.0, 1.0, 0.0, 10.0, step=1e-3, bound=1e6)

    def test_missing_reduction(self):
        jet = OdeJet(lambda y, dy, t: -y, 0.0, 0.0, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            jet(0.5, 3)
