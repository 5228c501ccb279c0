"""Expression parsing, symbolic derivatives, and their finite-difference oracle."""

import numpy as np
import pytest

from kdvgauge.expressions import CoefficientExpr, ExpressionError, parse_coefficient


class TestParsing:
    def test_tanh_derivative_at_origin(self):
        e = parse_coefficient("2 + tanh(x)")
        assert e.eval(0.0, 0.0, dx_order=1) == pytest.approx(1.0, rel=1e-14)

    def test_constant_all_derivatives_vanish(self):
        e = parse_coefficient("1")
        for dt in (0, 1):
            for dx in (0, 1, 2, 3, 4):
                if dt == 0 and dx == 0:
                    continue
                assert e.eval(0.3, 0.7, dt_order=dt, dx_order=dx) == 0.0

    def test_unclosed_paren_column(self):
        with pytest.raises(ExpressionError) as err:
            parse_coefficient("2 + tanh(")
        assert err.value.column == 9

    def test_unknown_identifier(self):
        with pytest.raises(ExpressionError, match="unknown identifier 'foo'"):
            parse_coefficient("1 + foo(x)")

    def test_unexpected_character(self):
        with pytest.raises(ExpressionError) as err:
            parse_coefficient("1 + @")
        assert err.value.column == 5

    def test_pi_constant(self):
        e = parse_coefficient("2*pi")
        assert e.eval(0.0, 0.0) == pytest.approx(2 * np.pi)

    def test_power_right_associative(self):
        e = parse_coefficient("2^3^2")
        assert e.eval(0.0, 0.0) == pytest.approx(512.0)

    def test_unary_minus(self):
        e = parse_coefficient("-sech(x)^2")
        assert e.eval(0.0, 0.0) == pytest.approx(-1.0)

    def test_scientific_numbers(self):
        e = parse_coefficient("1.5e-3*x")
        assert e.eval(0.0, 2.0) == pytest.approx(3e-3)

    def test_division_flagged(self):
        assert parse_coefficient("1/(1+x^2)").has_division
        assert not parse_coefficient("2+tanh(x)").has_division

    def test_vectorized_eval(self):
        e = parse_coefficient("sin(x)*cos(t)")
        x = np.linspace(-1, 1, 7)
        got = e.eval(0.5, x)
        assert np.allclose(got, np.sin(x) * np.cos(0.5))


class TestDerivativeOracle:
    CASES = [
        "exp(sin(x))",
        "2 + 0.5*tanh(x/4)",
        "sech(x)^2",
        "x^3 - 2*x + 1",
        "cos(x)*exp(-x^2/8)",
        "(2+tanh(x))^(-1/3)",
        "log(2 + sech(x))",
        "sin(t)*sech(x/2)^2",
    ]

    @pytest.mark.parametrize("text", CASES)
    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_x_derivatives_match_fd(self, text, order):
        # centered finite differences of the (order-1)-th derivative
        e = parse_coefficient(text)
        rng = np.random.default_rng(hash(text) % 2**32)
        pts = rng.uniform(-3.0, 3.0, size=20)
        ts = rng.uniform(0.0, 1.0, size=20)
        h = 1e-4
        for t, x in zip(ts, pts):
            analytic = e.eval(t, x, dx_order=order)
            fd = (
                e.eval(t, x + h, dx_order=order - 1)
                - e.eval(t, x - h, dx_order=order - 1)
            ) / (2 * h)
            assert abs(analytic - fd) <= 1e-6 * (1.0 + abs(analytic))

    def test_t_derivative_matches_fd(self):
        e = parse_coefficient("2 + 0.5*cos(t)*sech(x/4)^2")
        h = 1e-5
        for t, x in [(0.2, 0.5), (0.9, -2.0), (0.0, 1.3)]:
            analytic = e.eval(t, x, dt_order=1)
            fd = (e.eval(t + h, x) - e.eval(t - h, x)) / (2 * h)
            assert abs(analytic - fd) <= 1e-7 * (1.0 + abs(analytic))

    def test_order_out_of_range(self):
        e = parse_coefficient("x")
        with pytest.raises(ExpressionError, match="order out of range"):
            e.eval(0.0, 0.0, dx_order=5)
        with pytest.raises(ExpressionError, match="order out of range"):
            e.eval(0.0, 0.0, dt_order=2)


class TestAlgebraAndScreening:
    def test_composition_operators(self):
        a = parse_coefficient("2 + tanh(x)")
        b = parse_coefficient("cos(x)")
        r = (b - a.dx()) / (3.0 * a)
        x = np.linspace(-2, 2, 11)
        want = (np.cos(x) - 1 / np.cosh(x) ** 2) / (3 * (2 + np.tanh(x)))
        assert np.allclose(r.eval(0.0, x), want, atol=1e-14)

    def test_power_composition(self):
        a = parse_coefficient("2 + tanh(x)")
        inv_cbrt = a ** (-1.0 / 3.0)
        x = np.linspace(-2, 2, 11)
        assert np.allclose(inv_cbrt.eval(0.0, x), (2 + np.tanh(x)) ** (-1 / 3))

    def test_apply_named_function(self):
        a = parse_coefficient("x")
        assert (2.0 * a).apply("exp").eval(0.0, 1.0) == pytest.approx(np.e**2)

    def test_screen_catches_pole(self):
        e = parse_coefficient("1/x")
        with pytest.raises(ExpressionError, match="singular"):
            e.screen([0.0], np.linspace(-1, 1, 9))  # includes x = 0

    def test_screen_passes_smooth(self):
        e = parse_coefficient("1/(1+x^2)")
        e.screen([0.0, 1.0], np.linspace(-5, 5, 33))

    def test_depends_flags(self):
        assert parse_coefficient("sin(t)*x").depends_on_t
        assert parse_coefficient("sin(t)*x").depends_on_x
        assert not parse_coefficient("3.5").depends_on_t
        assert not CoefficientExpr.constant(2.0).depends_on_x
