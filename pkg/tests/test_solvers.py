import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocksg import (
    BatchSchedule,
    BlockPartition,
    BlockPoint,
    ConstraintSet,
    NumericalError,
    Regularizer,
    SolverConfig,
    StepsizeSchedule,
    UpdateOrder,
    bcgd_run,
    bsg_run,
    bsg_step,
    ergodic_average,
    run,
    sbmd_run,
    sg_run,
)
from blocksg.problems import QuadraticProblem, StreamingLeastSquares, ls_finite_sum, ls_generate, random_quadratic
from blocksg.solvers import ErgodicAverager


def coupled_quadratic():
    """0.5 (x1 - 1)^2 + 0.5 (x2 - 2)^2 + x1 x2."""
    return QuadraticProblem([[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0], BlockPartition([1, 1]), const=2.5)


def cfg(method="bsg", stepsize=None, batch=None, order="fixed", seed=0, **kw):
    kw.setdefault("iterations", 1)
    return SolverConfig(method, stepsize or StepsizeSchedule("constant", theta=0.1, cap=False),
                        batch or BatchSchedule("full"), UpdateOrder(order), seed=seed, **kw)


class TestWorkedExamples:
    def test_gauss_seidel_pass(self):
        prob = coupled_quadratic()
        x = bsg_step(prob, BlockPoint(prob.partition), 1, cfg(), np.random.default_rng(0))
        np.testing.assert_allclose(x.values, [0.1, 0.19], rtol=0, atol=1e-15)

    def test_jacobi_step(self):
        prob = coupled_quadratic()
        tr = sg_run(prob, np.zeros(2), cfg("sg"))
        np.testing.assert_allclose(tr.final_point.values, [0.1, 0.2], rtol=0, atol=1e-15)

    def test_bcgd_first_pass(self):
        # hand computation: x1 = 1, then x2 = 0 - ((0 - 2) + 1) = 1
        prob = coupled_quadratic()
        tr = bcgd_run(prob, np.zeros(2), cfg("bcgd", StepsizeSchedule.lipschitz_only()))
        np.testing.assert_allclose(tr.final_point.values, [1.0, 1.0], rtol=0, atol=1e-15)

    def test_single_block_matches_sg_step(self, rng):
        prob = ls_finite_sum(5, 20, seed=1, partition=BlockPartition([5]))
        x0 = rng.standard_normal(5)
        sched = StepsizeSchedule("constant", theta=0.05, cap=False)
        c = cfg(stepsize=sched, batch=BatchSchedule("constant", 3))
        x = bsg_step(prob, BlockPoint(prob.partition, x0), 1, c, np.random.default_rng(9))
        batch = prob.draw_batch(np.random.default_rng(9), 3)
        np.testing.assert_allclose(x.values, x0 - 0.05 * prob.gradient(x0, batch), rtol=1e-14)


class TestBudgetsAndTraces:
    def test_zero_budget(self):
        prob = coupled_quadratic()
        x0 = np.array([0.3, -0.2])
        tr = bsg_run(prob, x0, cfg(iterations=None, epochs=0))
        assert len(tr.records) == 1 and tr.iterations == 0
        np.testing.assert_array_equal(tr.final_point.values, x0)
        assert tr.records[0].objective == pytest.approx(prob.objective(x0))

    def test_requires_budget(self):
        with pytest.raises(ValueError):
            SolverConfig("bsg", StepsizeSchedule("constant", theta=0.1), BatchSchedule(), UpdateOrder())

    def test_epoch_accounting(self):
        prob = ls_finite_sum(4, 40, seed=2)
        c = cfg(stepsize=StepsizeSchedule("dim_sqrt", theta=0.1), batch=BatchSchedule("constant", 10),
                iterations=None, epochs=2, record_every=0.5)
        tr = bsg_run(prob, np.zeros(4), c)
        np.testing.assert_allclose(tr.epochs, [0, 0.5, 1.0, 1.5, 2.0])
        assert tr.iterations == 8 and tr.samples_consumed == 80

    def test_bcgd_iteration_is_epoch(self):
        prob = ls_finite_sum(4, 40, seed=2)
        tr = bcgd_run(prob, np.zeros(4), cfg("bcgd", StepsizeSchedule.lipschitz_only(), iterations=None, epochs=3))
        assert tr.iterations == 3
        assert np.all(np.diff(tr.objectives) <= 1e-15)

    def test_determinism(self):
        prob = ls_generate(8, seed=3, n_samples=50)
        c = cfg(stepsize=StepsizeSchedule("dim_sqrt", theta=0.2), batch=BatchSchedule("constant", 2),
                order="shuffled", iterations=None, epochs=1, seed=11, record_every=0.1)
        a, b = bsg_run(prob, np.zeros(8), c), bsg_run(prob, np.zeros(8), c)
        np.testing.assert_array_equal(a.objectives, b.objectives)
        np.testing.assert_array_equal(a.final_point.values, b.final_point.values)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_aborts(self):
        prob = coupled_quadratic()
        c = cfg(stepsize=StepsizeSchedule("constant", theta=1e200, cap=False), iterations=10)
        with pytest.raises(NumericalError):
            bsg_run(prob, np.array([1e200, 1e200]), c)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            SolverConfig("adam", StepsizeSchedule(), BatchSchedule(), UpdateOrder(), iterations=1)


class TestDescentAndFeasibility:
    def test_monotone_full_batch(self):
        prob = random_quadratic(6, BlockPartition([2, 2, 2]), cond=20, seed=5)
        L = prob.uniform_lipschitz()
        tr = bsg_run(prob, np.ones(6), cfg(stepsize=StepsizeSchedule("constant", theta=0.9 / L, cap=False),
                                           iterations=50, record_every=1e-9))
        assert np.all(np.diff(tr.objectives) < 0)

    def test_constant_function(self):
        prob = QuadraticProblem(np.zeros((3, 3)), np.zeros(3), BlockPartition([1, 2]), const=4.0)
        x0 = np.array([1.0, -2.0, 3.0])
        tr = sg_run(prob, x0, cfg("sg", iterations=20))
        np.testing.assert_array_equal(tr.final_point.values, x0)

    @pytest.mark.parametrize("method", ["bsg", "sg", "sbmd"])
    def test_iterates_stay_feasible(self, method):
        x_hat = np.random.default_rng(0).normal(0, 2, 6)
        cons = [ConstraintSet.box([-0.5, -0.5], [0.5, 0.5]), ConstraintSet.ball([0, 0], 0.7),
                ConstraintSet.all()]
        prob = StreamingLeastSquares(x_hat, partition=BlockPartition([2, 2, 2]), constraints=cons,
                                     regularizers=[Regularizer.l1(0.1)] * 3)
        xs = []
        c = cfg(method, StepsizeSchedule("dim_sqrt", theta=1.0), BatchSchedule("constant", 2), iterations=200,
                sbmd_coords=2)
        run(prob, np.zeros(6), c, callback=lambda k, x: xs.append(x.copy()))
        for x in xs:
            assert cons[0].contains(x[:2]) and cons[1].contains(x[2:4])


class TestSbmd:
    def test_unselected_unchanged(self):
        prob = QuadraticProblem(np.diag([1.0, 2.0, 3.0, 4.0]), np.ones(4), BlockPartition.coordinates(4))
        xs = []
        x0 = np.zeros(4)
        sbmd_run(prob, x0, cfg("sbmd", iterations=30, sbmd_coords=1), callback=lambda k, x: xs.append(x.copy()))
        prev = x0
        for x in xs:
            assert np.count_nonzero(x != prev) <= 1
            prev = x

    def test_selection_frequency(self):
        n, t, iters = 10, 3, 100_000
        prob = QuadraticProblem(np.eye(n), np.ones(n), BlockPartition.coordinates(n))
        counts = np.zeros(n)

        def cb(k, x):
            # from 0 with identity Hessian and step 1/2 a selected coordinate lands on 0.5
            counts[:] += x != 0.0
            x[:] = 0.0

        sbmd_run(prob, np.zeros(n), cfg("sbmd", StepsizeSchedule("constant", theta=0.5, cap=False),
                                        iterations=iters, sbmd_coords=t, record_every=1e12), callback=cb)
        expected = iters * t / n
        chi2 = np.sum((counts - expected) ** 2 / expected)
        assert counts.sum() == iters * t
        assert chi2 < 27.88  # 0.999 quantile, 9 degrees of freedom

    def test_t_bounds(self):
        prob = QuadraticProblem(np.eye(3), np.ones(3), BlockPartition.coordinates(3))
        with pytest.raises(ValueError):
            sbmd_run(prob, np.zeros(3), cfg("sbmd", sbmd_coords=4))


class TestReductions:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_bsg_single_block_is_sg(self, seed):
        prob = ls_finite_sum(6, 30, seed=seed % 97, partition=BlockPartition([6]))
        sched = StepsizeSchedule("dim_sqrt", theta=0.3)
        a, b = [], []
        bsg_run(prob, np.zeros(6), cfg(stepsize=sched, batch=BatchSchedule("constant", 2), iterations=30),
                callback=lambda k, x: a.append(x.copy()), batch_seed=seed)
        sg_run(prob, np.zeros(6), cfg("sg", sched, BatchSchedule("constant", 2), iterations=30, seed=5),
               callback=lambda k, x: b.append(x.copy()), batch_seed=seed)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_kernel_matches_generic(self):
        prob = ls_finite_sum(12, 60, seed=4, partition=BlockPartition.coordinates(12))
        sched = StepsizeSchedule("dim_sqrt", theta=0.5)
        out = []
        for use_kernel in (True, False):
            c = cfg(stepsize=sched, batch=BatchSchedule("constant", 3), order="shuffled", iterations=200,
                    seed=8, use_kernel=use_kernel)
            out.append(bsg_run(prob, np.zeros(12), c).final_point.values)
        np.testing.assert_allclose(out[0], out[1], rtol=0, atol=1e-12)


class TestErgodicAverage:
    def test_weighted(self):
        np.testing.assert_allclose(ergodic_average([np.array([0.0]), np.array([3.0])], [1.0, 2.0]), [2.0])

    def test_equal_weights_and_single(self):
        pts = [np.array([1.0, 2.0]), np.array([3.0, 6.0])]
        np.testing.assert_allclose(ergodic_average(pts, [0.5, 0.5]), [2.0, 4.0])
        np.testing.assert_allclose(ergodic_average(pts[:1], [0.3]), pts[0])

    def test_block_points(self):
        p = BlockPartition([1, 1])
        avg = ergodic_average([BlockPoint(p, [0, 0]), BlockPoint(p, [2, 4])], [1, 1])
        assert isinstance(avg, BlockPoint)
        np.testing.assert_allclose(avg.values, [1, 2])

    @pytest.mark.parametrize("points, steps", [([], []), ([np.zeros(1)], [1.0, 2.0]), ([np.zeros(1)], [0.0])])
    def test_errors(self, points, steps):
        with pytest.raises(ValueError):
            ergodic_average(points, steps)

    def test_averager_callback(self):
        sched = StepsizeSchedule("dim_linear", theta=1.0, cap=False)
        avg = ErgodicAverager(sched)
        avg(1, np.array([0.0]))
        avg(2, np.array([3.0]))
        np.testing.assert_allclose(avg.average, [1.0])
