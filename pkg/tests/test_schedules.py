import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blocksg import BatchSchedule, StepsizeSchedule, UpdateOrder, stepsize_value


class TestStepsize:
    @pytest.mark.parametrize("sched, k, L, expected", [
        (StepsizeSchedule("dim_sqrt", theta=0.1), 4, 1.0, 0.05),
        (StepsizeSchedule("dim_sqrt", theta=10.0), 1, 100.0, 0.01),
        (StepsizeSchedule("dim_linear", theta=2.0, cap=False), 8, 1.0, 0.25),
        (StepsizeSchedule("fixed_horizon", theta=3.0, horizon=9, cap=False), 5, 1.0, 1.0),
        (StepsizeSchedule("constant", theta=0.3), 7, 2.0, 0.3),
        (StepsizeSchedule.lipschitz_only(), 3, 4.0, 0.25),
        (StepsizeSchedule("dim_sqrt_log", theta=1.0, cap=False), 100, 1.0, 1 / (10 * math.log(100))),
        (StepsizeSchedule("dim_sqrt_log", theta=1.0, cap=False), 2, 1.0, 1 / math.sqrt(2)),
    ])
    def test_values(self, sched, k, L, expected):
        assert stepsize_value(sched, k, L) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("kwargs", [
        {"kind": "nope"}, {"kind": "dim_sqrt", "theta": 0.0}, {"kind": "fixed_horizon", "theta": 1.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            StepsizeSchedule(**kwargs)

    def test_bad_k_and_lipschitz(self):
        s = StepsizeSchedule("dim_sqrt", theta=1.0)
        with pytest.raises(ValueError):
            s.value(0, 1.0)
        with pytest.raises(ValueError):
            s.value(1, 0.0)

    @given(st.integers(1, 10 ** 6), st.floats(1e-6, 1e6), st.floats(1e-3, 1e3))
    def test_cap_is_min(self, k, L, theta):
        s = StepsizeSchedule("dim_sqrt", theta=theta)
        assert s.value(k, L) == min(theta / math.sqrt(k), 1 / L)
        assert s.value(k, L) <= 1 / L


class TestBatch:
    @pytest.mark.parametrize("sched, k, expected", [
        (BatchSchedule("constant", 5), 100, 5),
        (BatchSchedule("linear", 2, stride=10), 1, 2),
        (BatchSchedule("linear", 2, stride=10), 11, 3),
        (BatchSchedule("linear", 2, stride=10), 12, 4),
        (BatchSchedule("polynomial", 1, eps=0.1), 10, math.ceil(10 ** 1.1)),
    ])
    def test_sizes(self, sched, k, expected):
        assert sched.size(k) == expected

    def test_full(self):
        assert BatchSchedule("full").size(3, 40) == 40
        with pytest.raises(ValueError):
            BatchSchedule("full").size(3)

    @given(st.integers(1, 1000))
    def test_nondecreasing(self, k):
        for s in (BatchSchedule("linear", 1, 7), BatchSchedule("polynomial", 2, eps=0.2)):
            assert s.size(k + 1) >= s.size(k)


class TestOrder:
    def test_fixed(self):
        np.testing.assert_array_equal(UpdateOrder("fixed").order(4), [0, 1, 2, 3])

    def test_shuffled_reproducible(self):
        a = [UpdateOrder("shuffled").order(6, rng) for rng in [np.random.default_rng(3)] * 5]
        rng = np.random.default_rng(3)
        b = [UpdateOrder("shuffled").order(6, rng) for _ in range(5)]
        np.testing.assert_array_equal(a, b)
        assert all(sorted(p) == list(range(6)) for p in a)
