import math

import numpy as np
import pytest

from kernrecon.optim import Adam, OneCycleSchedule


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        opt = Adam()
        p = np.array([1.0, -2.0, 3.0])
        for _ in range(10):
            p = opt.step(p, np.zeros(3), lr=0.1)
        np.testing.assert_array_equal(p, [1.0, -2.0, 3.0])

    def test_first_step_hand_value(self):
        # bias-corrected first step: -lr * g / (|g| + eps); with |g| >> eps
        # the update is essentially -lr * sign(g)
        opt = Adam(beta1=0.9, beta2=0.99, eps=1e-8)
        g = 0.37
        lr = 0.05
        p = opt.step(np.array([0.0]), np.array([g]), lr)
        expected = -lr * g / (abs(g) + 1e-8)
        assert p[0] == pytest.approx(expected, rel=1e-12)
        assert p[0] == pytest.approx(-lr, rel=1e-6)

    def test_second_step_shrinks_for_constant_gradient(self):
        # hand-evaluate the bias-corrected formula at t=2
        opt = Adam(beta1=0.9, beta2=0.99, eps=1e-8)
        g = np.array([0.8])
        p0 = np.array([0.0])
        p1 = opt.step(p0, g, lr=0.1)
        p2 = opt.step(p1, g, lr=0.1)
        up1 = abs(p1[0] - p0[0])
        up2 = abs(p2[0] - p1[0])
        assert up2 <= up1 * (1.0 + 1e-6)
        # independent recomputation of step 2
        m2 = (0.9 * 0.1 * g[0] + 0.1 * g[0]) / (1.0 - 0.9 ** 2)
        v2 = (0.99 * 0.01 * g[0] ** 2 + 0.01 * g[0] ** 2) / (1.0 - 0.99 ** 2)
        assert up2 == pytest.approx(0.1 * m2 / (math.sqrt(v2) + 1e-8), rel=1e-12)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(0)
        p = rng.normal(size=6)
        grads = [rng.normal(size=6) for _ in range(5)]
        perm = rng.permutation(6)

        a, b = Adam(), Adam()
        pa, pb = p.copy(), p[perm].copy()
        for g in grads:
            pa = a.step(pa, g, lr=0.03)
            pb = b.step(pb, g[perm], lr=0.03)
        np.testing.assert_array_equal(pa[perm], pb)

    def test_step_counter_increments_by_one(self):
        opt = Adam()
        p = np.zeros(2)
        for expected in range(1, 6):
            p = opt.step(p, np.ones(2), lr=0.01)
            assert opt.t == expected

    def test_nonfinite_gradient_rejected_with_index(self):
        opt = Adam()
        g = np.array([[0.0, 1.0], [np.nan, 2.0]])
        with pytest.raises(ValueError, match=r"\(1, 0\)"):
            opt.step(np.zeros((2, 2)), g, lr=0.1)

    def test_shape_mismatch_rejected(self):
        opt = Adam()
        with pytest.raises(ValueError):
            opt.step(np.zeros(3), np.zeros(4), lr=0.1)


class TestOneCycle:
    def test_starts_at_initial_rate(self):
        s = OneCycleSchedule(max_lr=0.02, total_steps=1000)
        assert s.lr(0) == pytest.approx(0.02 / 10.0)

    def test_peak_at_end_of_warmup(self):
        s = OneCycleSchedule(max_lr=0.02, total_steps=1000)
        t = math.ceil(0.15 * 1000)
        assert s.lr(t) == pytest.approx(0.02, rel=1e-12)
        assert max(s.lr(t) for t in range(1000)) == pytest.approx(0.02)

    def test_final_floor(self):
        s = OneCycleSchedule(max_lr=0.02, total_steps=1000)
        floor = 0.02 / (10.0 * 100.0)
        assert s.lr(999) == pytest.approx(floor, rel=1e-12)
        phase3 = [s.lr(t) for t in range(2 * 150 + 1, 1000)]
        assert min(phase3) == pytest.approx(floor)

    def test_continuity(self):
        total = 400
        s = OneCycleSchedule(max_lr=0.02, total_steps=total)
        lrs = np.array([s.lr(t) for t in range(total)])
        min_phase = math.ceil(0.15 * total)
        bound = 2.0 * 0.02 / min_phase
        assert np.max(np.abs(np.diff(lrs))) <= bound

    def test_two_phase_variant(self):
        s = OneCycleSchedule(max_lr=0.01, total_steps=100, three_phase=False)
        assert s.lr(0) == pytest.approx(0.001)
        assert s.lr(15) == pytest.approx(0.01)
        assert s.lr(99) == pytest.approx(0.01 / 1000.0)

    def test_out_of_range_step(self):
        s = OneCycleSchedule(max_lr=0.01, total_steps=10)
        with pytest.raises(ValueError):
            s.lr(10)
        with pytest.raises(ValueError):
            s.lr(-1)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            OneCycleSchedule(max_lr=0.01, total_steps=0)
        with pytest.raises(ValueError):
            OneCycleSchedule(max_lr=0.01, total_steps=10, pct_start=0.6)
        with pytest.raises(ValueError):
            OneCycleSchedule(max_lr=0.01, total_steps=10, div_factor=0.5)
