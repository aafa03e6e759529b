"""Quadrature helpers: exactness, adaptivity, and tensor products."""

import numpy as np
import pytest

from vpdecay.quadrature import (
    QuadratureError,
    gauss_legendre,
    integrate_adaptive,
    tensor_rule,
)


class TestGaussLegendre:
    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_polynomial_exactness(self, n):
        # an n-node rule integrates degree 2n-1 exactly
        x, w = gauss_legendre(n, -1.0, 1.0)
        for deg in range(2 * n):
            exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
            assert float(w @ x ** deg) == pytest.approx(exact, abs=1e-14)

    def test_degree_beyond_exactness_fails(self):
        x, w = gauss_legendre(2, -1.0, 1.0)
        exact = 2.0 / 5.0
        assert abs(float(w @ x ** 4) - exact) > 1e-3

    def test_interval_mapping(self):
        x, w = gauss_legendre(4, 1.0, 3.0)
        assert float(w @ x ** 2) == pytest.approx(26.0 / 3.0, rel=1e-14)
        assert float(np.sum(w)) == pytest.approx(2.0, rel=1e-14)
        assert x.min() > 1.0 and x.max() < 3.0

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            gauss_legendre(0, 0.0, 1.0)
        with pytest.raises(ValueError):
            gauss_legendre(4, 1.0, 1.0)
        with pytest.raises(ValueError):
            gauss_legendre(4, 2.0, 1.0)

    def test_nodes_are_deterministic(self):
        x1, w1 = gauss_legendre(16, -2.0, 5.0)
        x2, w2 = gauss_legendre(16, -2.0, 5.0)
        assert np.array_equal(x1, x2) and np.array_equal(w1, w2)


class TestIntegrateAdaptive:
    def test_smooth_integrand(self):
        val, err = integrate_adaptive(np.exp, 0.0, 2.0)
        assert val == pytest.approx(np.exp(2.0) - 1.0, abs=1e-12)
        assert err <= 1e-12

    def test_kink_with_breakpoint(self):
        val, _ = integrate_adaptive(np.abs, -1.0, 1.0, breakpoints=(0.0,))
        assert val == pytest.approx(1.0, abs=1e-13)

    def test_breakpoints_outside_interval_ignored(self):
        val, _ = integrate_adaptive(np.exp, 0.0, 1.0, breakpoints=(-5.0, 7.0))
        assert val == pytest.approx(np.exp(1.0) - 1.0, abs=1e-12)

    def test_empty_interval(self):
        assert integrate_adaptive(np.exp, 1.0, 1.0) == (0.0, 0.0)

    def test_nonconvergent_raises(self):
        f = lambda x: np.sin(3000.0 * x)
        with pytest.raises(QuadratureError):
            integrate_adaptive(f, 0.0, 1.0, n_max=64)


class TestTensorRule:
    def test_separable_product(self):
        rx = gauss_legendre(6, 0.0, 1.0)
        ry = gauss_legendre(5, -1.0, 1.0)
        pts, w = tensor_rule([rx, ry])
        assert pts.shape == (30, 2) and w.shape == (30,)
        # integral of x^2 * y^2 over [0,1] x [-1,1]
        val = float(w @ (pts[:, 0] ** 2 * pts[:, 1] ** 2))
        assert val == pytest.approx((1.0 / 3.0) * (2.0 / 3.0), rel=1e-14)

    def test_weight_sum_is_volume(self):
        rules = [gauss_legendre(3, 0.0, 2.0), gauss_legendre(4, 1.0, 4.0),
                 gauss_legendre(2, -1.0, 0.0)]
        _, w = tensor_rule(rules)
        assert float(np.sum(w)) == pytest.approx(2.0 * 3.0 * 1.0, rel=1e-14)

    def test_last_axis_varies_fastest(self):
        rx = (np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        ry = (np.array([10.0, 20.0, 30.0]), np.ones(3))
        pts, _ = tensor_rule([rx, ry])
        assert np.array_equal(pts[:3, 0], np.zeros(3))
        assert np.array_equal(pts[:3, 1], np.array([10.0, 20.0, 30.0]))
