import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpweber.core import build_instance, cost, gradient
from lpweber.exceptions import EmptyInput, HitDataPoint, SingularStencil, WrongParams
from lpweber.oracle import (
    GridSearchSpec,
    finite_diff_gradient,
    grid_refine_minimize,
    l1_median_oracle,
    l2_cost,
    l2_weiszfeld,
    weighted_coordinate_median,
)
from lpweber.solver import SolverConfig, solve

TRIANGLE = [[0, 0], [1, 0], [0, 1]]


class TestWeightedMedian:
    @pytest.mark.parametrize("values,weights,expected", [
        ([0, 1, 3], [1, 1, 1], 1),
        ([0, 10], [3, 1], 0),
        ([0, 1], [1, 1], 0),
        ([3, 0, 1], [1, 1, 1], 1),
        ([5.5], [2], 5.5),
    ])
    def test_examples(self, values, weights, expected):
        assert weighted_coordinate_median(values, weights) == expected

    def test_empty(self):
        with pytest.raises(EmptyInput):
            weighted_coordinate_median([], [])

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            weighted_coordinate_median([1, 2], [1, 0])

    @given(st.lists(st.tuples(st.integers(-20, 20), st.integers(1, 5)), min_size=1, max_size=15))
    def test_minimizes_weighted_abs(self, pairs):
        v = np.array([a for a, _ in pairs], float)
        w = np.array([b for _, b in pairs], float)
        med = weighted_coordinate_median(v, w)
        f = lambda x: w @ np.abs(v - x)
        assert all(f(med) <= f(x) for x in np.linspace(-21, 21, 337))


class TestL1Oracle:
    def test_triangle(self):
        inst = build_instance(TRIANGLE, None, 1, 1)
        y = l1_median_oracle(inst)
        np.testing.assert_array_equal(y, [0, 0])
        assert cost(inst, y) == 2

    def test_single_point(self):
        inst = build_instance([[4.0, -1.0, 2.0]], [3.0], 1, 1)
        np.testing.assert_array_equal(l1_median_oracle(inst), [4.0, -1.0, 2.0])

    def test_shift(self, rng):
        X = rng.integers(-5, 6, size=(7, 3)).astype(float)
        c = np.array([1.5, -2.0, 10.0])
        a = l1_median_oracle(build_instance(X, None, 1, 1))
        b = l1_median_oracle(build_instance(X + c, None, 1, 1))
        np.testing.assert_allclose(b, a + c)

    def test_wrong_params(self):
        with pytest.raises(WrongParams):
            l1_median_oracle(build_instance(TRIANGLE, None, 1.5, 1))

    @pytest.mark.parametrize("seed", range(5))
    def test_not_beaten_by_grid(self, seed):
        r = np.random.default_rng(seed)
        inst = build_instance(r.integers(-5, 6, size=(5, 2)).astype(float), r.uniform(0.5, 2, 5), 1, 1)
        _, grid_cost = grid_refine_minimize(inst)
        assert cost(inst, l1_median_oracle(inst)) <= grid_cost + 1e-9


class TestGrid:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            GridSearchSpec([0, 0], [0, 1])
        with pytest.raises(ValueError):
            GridSearchSpec([0], [1], points_per_dim=2)
        with pytest.raises(ValueError):
            GridSearchSpec([0], [1], shrink=1.0)

    def test_single_point(self):
        inst = build_instance([[0.3, -0.2, 0.7]], None, 1.5, 1.2)
        spec = GridSearchSpec([-1, -1, -1], [1, 1, 1], points_per_dim=21, refine_levels=3, shrink=0.3)
        y, c = grid_refine_minimize(inst, spec)
        final_cell = 2.0 * 0.3 ** 2 / 20
        assert np.max(np.abs(y - inst.points[0])) <= final_cell
        assert c == cost(inst, y)

    def test_agrees_with_l1_oracle(self):
        inst = build_instance(TRIANGLE, None, 1, 1)
        _, c = grid_refine_minimize(inst, GridSearchSpec([-1, -1], [2, 2], 41, 6, 0.3))
        assert c == pytest.approx(cost(inst, l1_median_oracle(inst)), abs=1e-3)

    @pytest.mark.parametrize("seed", range(5))
    def test_never_beats_solver(self, seed):
        r = np.random.default_rng(seed)
        inst = build_instance(r.normal(size=(6, 2)), r.uniform(0.5, 2, 6), 1.5, 1.2)
        res = solve(inst, config=SolverConfig(tol=1e-12, tol2=1e-16, max_iter=5000))
        _, c = grid_refine_minimize(inst)
        assert c >= res.cost - 1e-6


class TestL2Weiszfeld:
    def test_equilateral(self):
        y = l2_weiszfeld([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
        np.testing.assert_allclose(y, [0.5, np.sqrt(3) / 6], atol=1e-8)

    def test_square(self):
        y = l2_weiszfeld([[0, 0], [1, 0], [0, 1], [1, 1]], y0=[0.2, 0.9])
        np.testing.assert_allclose(y, [0.5, 0.5], atol=1e-8)

    def test_single_point(self):
        np.testing.assert_array_equal(l2_weiszfeld([[2.0, 3.0]]), [2.0, 3.0])

    def test_hit_is_surfaced(self):
        with pytest.raises(HitDataPoint) as info:
            l2_weiszfeld([[0, 0], [1, 0], [0, 1]], y0=[1, 0])
        assert info.value.index == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_strict_descent(self, seed):
        r = np.random.default_rng(seed)
        X, w = r.normal(size=(8, 3)), r.uniform(0.5, 2, 8)
        y0 = r.normal(size=3) * 4
        costs = [l2_cost(X, w, y0)]
        for k in range(1, 15):
            costs.append(l2_cost(X, w, l2_weiszfeld(X, w, y0, tol=1e-300, max_iter=k)))
        assert all(b < a for a, b in zip(costs, costs[1:]))


class TestFiniteDiff:
    def test_sign_gradient(self):
        inst = build_instance([[0, 0]], None, 1, 1)
        np.testing.assert_allclose(finite_diff_gradient(inst, [2, 3], 1e-6), [1, 1], atol=1e-6)

    def test_stencil_crossing(self):
        inst = build_instance([[0, 0], [1, 1]], None, 1.5, 1.2)
        with pytest.raises(SingularStencil):
            finite_diff_gradient(inst, [0.5, 1 + 1e-8], 1e-6)

    def test_matches_gradient(self, rng):
        inst = build_instance(rng.normal(size=(6, 3)), rng.uniform(0.5, 2, 6), 1.6, 1.3)
        for _ in range(100):
            y = rng.normal(size=3) * 2
            g = gradient(inst, y)
            assert np.linalg.norm(finite_diff_gradient(inst, y) - g) <= 1e-5 * max(1.0, np.linalg.norm(g))

    def test_second_order_error(self):
        inst = build_instance([[0, 0, 0], [1, 2, -1], [3, -1, 2]], [1, 2, 1], 1.7, 1.4)
        y = np.array([0.8, 0.6, 0.9])
        g = gradient(inst, y)
        e1 = np.linalg.norm(finite_diff_gradient(inst, y, 1e-3) - g)
        e2 = np.linalg.norm(finite_diff_gradient(inst, y, 1e-4) - g)
        assert e2 < e1 / 20
