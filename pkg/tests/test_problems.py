import math

import numpy as np
import pytest

from safezo.problems import (DomainError, NoFeasiblePoint, check_constants,
                             disk_quadratic, grid_reference, linear1d,
                             problem_from_config, random_instance, turning_eval,
                             turning_problem)

from . import reference as ref


class TestTurning:
    def test_start_values(self):
        p = turning_problem()
        v = p.evaluate(p.x0)
        assert v[0] == pytest.approx(ref.turning_cost(150, 0.09), rel=1e-12)
        assert v[1] == pytest.approx(ref.roughness(150, 0.09) - 0.7, rel=1e-12)
        assert turning_eval(p.x0, "cost") == pytest.approx(3.7997, abs=5e-5)

    def test_box_residual_on_lower_bound(self):
        assert turning_eval([0.1, 0.12], "box_1_lo") == 0.0

    def test_constraint_layout(self):
        p = turning_problem()
        assert p.m == 5
        assert list(p.known_exactly) == [False, True, True, True, True]
        assert list(p.constraint_lipschitz) == [7.0, 1.0, 1.0, 1.0, 1.0]

    def test_gradients_match_differences(self):
        p = turning_problem()
        x = np.array([0.17, 0.11])
        G = p.gradients(x)
        h = 1e-7
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (p.evaluate(x + e) - p.evaluate(x - e)) / (2 * h)
            np.testing.assert_allclose(G[:, j], fd, rtol=1e-6, atol=1e-6)

    def test_geometry_scales_cost(self):
        assert turning_eval([0.15, 0.09], geometry_constant=2.0) == pytest.approx(
            2 * ref.turning_cost(150, 0.09), rel=1e-12)

    def test_tool_life_domain(self):
        with pytest.raises(DomainError):
            turning_eval([0.1, 1.0], "cost")

    def test_unknown_function(self):
        with pytest.raises(KeyError):
            turning_eval([0.15, 0.09], "speed")


class TestAnalytic:
    def test_linear_minimizer(self):
        p = linear1d()
        for eta in (0.2, 0.1, 0.05):
            assert p.barrier_minimizer(eta)[0] == eta

    def test_disk_kkt(self):
        p = disk_quadratic()
        np.testing.assert_allclose(p.kkt_point, [1 / math.sqrt(2)] * 2)
        assert p.kkt_multiplier[0] == pytest.approx(2 * math.sqrt(2) - 1)

    def test_disk_barrier_minimizer_residual(self):
        p = disk_quadratic()
        x = p.barrier_minimizer(0.1)
        assert np.linalg.norm(p.barrier_grad(x, 0.1)) < 1e-10


class TestGridReference:
    def test_linear_barrier(self):
        r = grid_reference(linear1d(), "barrier", h=1e-4, eta=0.1)
        assert abs(r.point[0] - 0.1) <= 1e-4

    def test_disk_objective(self):
        r = grid_reference(disk_quadratic(), "objective", h=1e-3)
        np.testing.assert_allclose(r.point, [0.70711, 0.70711], atol=2e-3)

    def test_empty_feasible_set(self):
        p = linear1d()
        p.constraints = [lambda x: np.ones(np.shape(x)[:-1])]
        with pytest.raises(NoFeasiblePoint, match="no feasible grid point"):
            grid_reference(p, "objective", h=1e-2)

    def test_refinement_never_worse(self):
        r = grid_reference(disk_quadratic(), "barrier", h=1e-2, eta=0.1)
        assert r.value <= r.coarse_value
        assert r.levels == sorted(r.levels, reverse=True)

    def test_bad_target(self):
        with pytest.raises(ValueError):
            grid_reference(linear1d(), "dual")


class TestRandomInstance:
    def test_deterministic(self):
        a, b = random_instance(3, 4, seed=11), random_instance(3, 4, seed=11)
        X = np.random.default_rng(0).uniform(-1, 1, (50, 3))
        np.testing.assert_array_equal(a.evaluate(X), b.evaluate(X))

    def test_seed_changes_instance(self):
        a, b = random_instance(2, 2, seed=1), random_instance(2, 2, seed=2)
        assert not np.allclose(a.evaluate(np.full(2, 0.3)), b.evaluate(np.full(2, 0.3)))

    @pytest.mark.parametrize("d,m", [(1, 1), (2, 3), (5, 2), (8, 4)])
    def test_gradient_bound(self, d, m):
        p = random_instance(d, m, seed=d * 10 + m)
        X = np.random.default_rng(d).uniform(-1, 1, (10_000, d))
        for gf in p.constraint_grads:
            assert np.max(np.linalg.norm(gf(X), axis=1)) <= p.L

    @pytest.mark.parametrize("seed", range(5))
    def test_start_strictly_feasible(self, seed):
        p = random_instance(3, 5, seed=seed)
        assert np.all(p.constraint_values(p.x0) < 0)

    def test_constants_pass_sampling_check(self):
        out = check_constants(random_instance(2, 3, seed=4), n=200, warn=False)
        assert out["L_ok"] and out["M_ok"]


class TestConfigFactory:
    def test_names(self):
        assert problem_from_config({"name": "disk"}).name == "disk"
        assert problem_from_config({"name": "random", "d": 3, "m": 2}).d == 3

    def test_turning_override(self):
        p = problem_from_config({"name": "turning", "x0": "0.16,0.1"})
        np.testing.assert_array_equal(p.x0, [0.16, 0.1])

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            problem_from_config({"name": "disk", "radius": 2})

    def test_unknown_problem(self):
        with pytest.raises(KeyError):
            problem_from_config({"name": "rosenbrock"})
