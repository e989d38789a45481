import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from safezo.estimator import (batch_size, estimate_all, grad_exact, grad_noisy,
                              probe_points, ucb, ucb_from_mean)
from safezo.oracle import GaussianNoise, NoiseModel, Oracle, ProblemSpec

from . import reference as ref


def linear(a, M=1.0):
    a = np.asarray(a, float)
    return ProblemSpec(lambda x: x @ a, [lambda x: np.full(np.shape(x)[:-1], -1.0)],
                       np.zeros(a.size), M, 1.0)


def half_square(d=2):
    return ProblemSpec(lambda x: 0.5 * np.sum(x * x, axis=-1),
                       [lambda x: np.full(np.shape(x)[:-1], -1.0)], np.zeros(d), 1.0, 1.0)


class ScriptedNoise(NoiseModel):
    """Returns pre-set draws; used to force specific noise realizations."""

    def __init__(self, draws):
        super().__init__(1.0)
        self.draws = np.asarray(draws, float)

    def draw(self, size):
        return np.broadcast_to(self.draws.reshape((1, -1, 1)), size).copy()


class TestBatchSize:
    @pytest.mark.parametrize("nu,sigma,delta,M,expected", [
        (0.014142, 0.01, 0.01, 5.0, 1229),
        (1.0, 1.0, math.exp(-1), 1.0, 3),
        (0.1, 0.0, 0.01, 5.0, 1),
    ])
    def test_examples(self, nu, sigma, delta, M, expected):
        assert batch_size(nu, sigma, delta, M) == expected
        assert ref.batch_size(nu, sigma, delta, M) == expected

    @given(nu=st.floats(1e-3, 1), sigma=st.floats(1e-4, 1), delta=st.floats(1e-4, 0.5))
    def test_matches_reference(self, nu, sigma, delta):
        assert batch_size(nu, sigma, delta, 5.0) == ref.batch_size(nu, sigma, delta, 5.0)

    def test_monotone_in_nu(self):
        ns = [batch_size(nu, 0.01, 0.01, 5.0) for nu in (0.1, 0.05, 0.02, 0.01)]
        assert ns == sorted(ns)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            batch_size(0.0, 0.01, 0.01, 5.0)
        with pytest.raises(ValueError):
            batch_size(0.1, 0.01, 1.0, 5.0)


class TestUCB:
    def test_exact_samples(self):
        cb = ucb([0.3] * 10, 0.0, 0.05)
        assert cb.upper == 0.3 and cb.half_width == 0.0

    def test_arithmetic_example(self):
        cb = ucb_from_mean(0.5, 100, 0.01, 0.01)
        up, eps = ref.ucb(0.5, 100, 0.01, 0.01)
        assert cb.upper == pytest.approx(up, rel=1e-12)
        assert cb.half_width == pytest.approx(eps, rel=1e-12)
        assert cb.upper == pytest.approx(0.502146, abs=1e-6)
        assert cb.half_width == pytest.approx(0.004292, abs=1e-6)
        assert cb.lower == pytest.approx(cb.upper - cb.half_width)


class TestGradExact:
    @given(a=st.lists(st.floats(-10, 10), min_size=1, max_size=5), nu=st.floats(1e-3, 1))
    def test_affine_is_exact(self, a, nu):
        est = grad_exact(Oracle(linear(a)), np.zeros(len(a)), 0, nu)
        np.testing.assert_allclose(est.g, a, atol=1e-9 * (1 + max(map(abs, a))) / nu)

    def test_half_square_tight_bound(self):
        est = grad_exact(Oracle(half_square()), np.zeros(2), 0, 0.1)
        np.testing.assert_allclose(est.g, [0.05, 0.05], rtol=1e-12)
        assert np.linalg.norm(est.g) == pytest.approx(0.05 * math.sqrt(2), rel=1e-12)
        assert est.bound == pytest.approx(math.sqrt(2) * 0.1 * 1 / 2, rel=1e-12)

    def test_constant_gives_zero(self):
        est = grad_exact(Oracle(linear([0.0, 0.0, 0.0])), np.ones(3), 1, 0.2)
        np.testing.assert_array_equal(est.g, 0.0)

    def test_charges_d_plus_one_calls(self):
        o = Oracle(half_square(3))
        grad_exact(o, np.zeros(3), 0, 0.1)
        assert o.calls == 4

    def test_rejects_noisy_oracle(self):
        with pytest.raises(ValueError):
            grad_exact(Oracle(half_square(), GaussianNoise(0.1)), np.zeros(2), 0, 0.1)

    @pytest.mark.parametrize("nu", [0.1, 0.01, 0.001])
    def test_first_order_convergence(self, nu):
        f = ProblemSpec(lambda x: np.sin(x[..., 0]) * np.cos(x[..., 1]),
                        [lambda x: np.full(np.shape(x)[:-1], -1.0)], np.zeros(2), 1.0, 1.0)
        x = np.array([0.3, -0.2])
        est = grad_exact(Oracle(f), x, 0, nu)
        true = np.array([math.cos(0.3) * math.cos(-0.2), -math.sin(0.3) * math.sin(-0.2)])
        assert np.linalg.norm(est.g - true) <= est.bound


class TestGradNoisy:
    def test_zero_sigma_equals_exact(self):
        p = half_square()
        a = grad_noisy(Oracle(p, GaussianNoise(0.0)), np.ones(2), 0, 0.1, n=17)
        b = grad_exact(Oracle(p), np.ones(2), 0, 0.1)
        np.testing.assert_array_equal(a.g, b.g)

    def test_forced_noise(self):
        c, nu = 0.3, 0.05
        o = Oracle(linear([0.0]), ScriptedNoise([0.0, c]))
        est = grad_noisy(o, np.zeros(1), 0, nu, n=1)
        assert est.g[0] == pytest.approx(c / nu, rel=1e-12)

    def test_deviation_frequency(self):
        d, sigma, delta, M, nu = 2, 0.01, 0.01, 5.0, 0.014142
        a = np.array([0.7, -0.4])
        n = batch_size(nu, sigma, delta, M)
        o = Oracle(linear(a, M=M), GaussianNoise(sigma, seed=2024))
        hits = 0
        for t in range(500):
            est = grad_noisy(o, np.zeros(d), 0, nu, n, delta, t=t)
            hits += np.linalg.norm(est.g - a) <= est.bound
        assert hits / 500 >= 1 - delta
        assert o.calls == 500 * (d + 1) * n


class TestProbes:
    def test_probe_layout(self):
        P = probe_points(np.array([1.0, 2.0]), 0.5)
        np.testing.assert_array_equal(P, [[1, 2], [1.5, 2], [1, 2.5]])

    def test_estimate_all_shapes(self):
        G, c = estimate_all(Oracle(half_square(3)), np.ones(3), 0.1)
        assert G.shape == (2, 3) and c.shape == (2,)
