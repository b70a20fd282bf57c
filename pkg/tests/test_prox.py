import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blocksg import (
    ConstraintSet,
    Regularizer,
    gradient_mapping,
    project,
    projected_subgradient_step,
    prox,
    prox_step,
    soft_threshold,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vecs(n):
    return arrays(np.float64, n, elements=finite)


class TestSoftThreshold:
    def test_componentwise(self):
        np.testing.assert_array_equal(soft_threshold([3, -0.5, 0], 1.0), [2, 0, 0])

    @given(vecs(5))
    def test_zero_threshold_is_identity(self, v):
        np.testing.assert_array_equal(soft_threshold(v, 0.0), v)

    def test_grid_oracle(self):
        grid = np.arange(-1.0, 2.0, 1e-4)
        best = grid[np.argmin(0.3 * np.abs(grid) + 0.5 * (grid - 0.7) ** 2)]
        got = soft_threshold([0.7], 0.3)[0]
        assert got == pytest.approx(0.4, abs=1e-15)
        assert abs(got - best) <= 1e-4

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            soft_threshold([1.0], -0.1)


class TestProxStep:
    def test_zero_regularizer(self):
        np.testing.assert_allclose(prox_step([1.0, 2.0], [0.5, -1.0], 0.2, Regularizer.zero()), [0.9, 2.2])

    def test_l1(self):
        np.testing.assert_allclose(prox_step([2.0], [1.0], 0.5, Regularizer.l1(1.0)), [1.0])

    def test_bad_stepsize(self):
        with pytest.raises(ValueError):
            prox_step([1.0], [1.0], 0.0, Regularizer.zero())

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            prox_step([1.0, 2.0], [1.0], 0.1, Regularizer.zero())

    @settings(max_examples=50)
    @given(vecs(3), vecs(3), st.floats(0.01, 2.0), st.floats(0.0, 5.0))
    def test_beats_random_points(self, x, g, alpha, lam):
        r = Regularizer.l1(lam)

        def obj(z):
            return g @ (z - x) + np.sum((z - x) ** 2) / (2 * alpha) + r.value(z)

        z = prox_step(x, g, alpha, r)
        pts = z + np.random.default_rng(0).normal(0, 1 + np.abs(z).max(), (1000, 3))
        assert all(obj(z) <= obj(p) + 1e-9 * (1 + abs(obj(p))) for p in pts)

    @given(vecs(4), st.floats(0.01, 2.0), st.floats(0.0, 3.0))
    def test_gradient_mapping_bound(self, x, alpha, lam):
        g = np.linspace(-2, 2, 4)
        r = Regularizer.l1(lam)
        h = gradient_mapping(x, prox_step(x, g, alpha, r), alpha)
        assert h @ h <= 2 * g @ g + 2 * r.lipschitz_const(4) ** 2 + 1e-9


class TestProjectedStep:
    def test_whole_space(self):
        np.testing.assert_allclose(projected_subgradient_step([1.0], [2.0], [0.0], 0.25, ConstraintSet.all()), [0.5])

    def test_ball(self):
        got = projected_subgradient_step([0, 0], [-4, 0], [0, 0], 1.0, ConstraintSet.ball([0, 0], 1.0))
        np.testing.assert_allclose(got, [1.0, 0.0])

    def test_box_and_grid(self):
        X = ConstraintSet.box([0.0], [1.0])
        got = projected_subgradient_step([0.5], [2.0], [0.1], 1.0, X)
        np.testing.assert_array_equal(got, [0.0])
        grid = np.arange(0.0, 1.0 + 1e-4, 1e-4)
        best = grid[np.argmin(2.1 * (grid - 0.5) + 0.5 * (grid - 0.5) ** 2)]
        assert abs(got[0] - best) <= 1e-4


class TestProject:
    def test_cases(self):
        np.testing.assert_array_equal(project(ConstraintSet.all(), [3.0, -1.0]), [3.0, -1.0])
        np.testing.assert_array_equal(project(ConstraintSet.box([0, 0], [1, 1]), [-1, 2]), [0, 1])
        np.testing.assert_allclose(project(ConstraintSet.ball([0, 0], 2.0), [3, 4]), [1.2, 1.6])

    def test_degenerate_box(self):
        np.testing.assert_array_equal(project(ConstraintSet.box([0.3], [0.3]), [5.0]), [0.3])

    @given(vecs(3), vecs(3), st.floats(0.1, 10.0))
    def test_nonexpansive_and_idempotent(self, u, v, radius):
        for X in (ConstraintSet.ball([0.5, -1.0, 2.0], radius), ConstraintSet.box([-1, 0, -2], [1, 2, radius])):
            pu, pv = project(X, u), project(X, v)
            assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) * (1 + 1e-12) + 1e-12
            np.testing.assert_allclose(project(X, pu), pu, rtol=0, atol=1e-12 * (1 + np.abs(pu).max()))
            assert X.contains(pu)

    @given(vecs(4), vecs(4), st.floats(0.0, 10.0), st.floats(0.01, 5.0))
    def test_prox_nonexpansive(self, u, v, lam, alpha):
        r = Regularizer.l1(lam)
        assert np.linalg.norm(prox(r, u, alpha) - prox(r, v, alpha)) <= np.linalg.norm(u - v) * (1 + 1e-12) + 1e-12


class TestGradientMapping:
    def test_values(self):
        np.testing.assert_array_equal(gradient_mapping([1.0], [0.5], 0.25), [2.0])
        np.testing.assert_array_equal(gradient_mapping([1.0, 2.0], [1.0, 2.0], 0.1), [0.0, 0.0])
