import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paramskill.armsim import Task
from paramskill.dmp import POLICY_DIM, default_theta
from paramskill.power import (ExplorationConfig, Rollout, SimContext, default_sigma_hat,
                              importance_select, learn_policy, perturb, power_update,
                              rollout_seed)

SIM = SimContext()


def rollout(eps, q, seed=0):
    eps = np.asarray(eps, dtype=float)
    return Rollout(eps.copy(), eps, None, float(q), seed)


class TestConfig:
    def test_defaults(self):
        cfg = ExplorationConfig()
        assert cfg.sigma_hat.shape == (POLICY_DIM,)
        assert (cfg.rollouts_per_update, cfg.importance_top_k, cfg.history_batches) == (20, 10, 3)
        assert cfg.success_threshold == 0.05

    def test_sigma_layout(self):
        s = default_sigma_hat(0.1, 0.2, 0.3)
        assert s[0] == 0.1 and s[1] == 0.2 and np.all(s[2:] == 0.3)

    @pytest.mark.parametrize("kwargs", [
        {"sigma_hat": -np.ones(POLICY_DIM)}, {"importance_top_k": 61}, {"importance_top_k": 0},
        {"rollouts_per_update": 0}, {"max_updates": -1}, {"success_threshold": 0.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ExplorationConfig(**kwargs)

    def test_dict_round_trip(self):
        cfg = ExplorationConfig(max_updates=7)
        back = ExplorationConfig.from_dict(cfg.to_dict())
        assert np.array_equal(back.sigma_hat, cfg.sigma_hat) and back.max_updates == 7


class TestPerturb:
    def test_zero_variance_is_identity(self):
        cfg = ExplorationConfig(sigma_hat=np.zeros(POLICY_DIM))
        th = default_theta(1.0, 0.4)
        pert, eps = perturb(th, cfg, 5)
        assert np.array_equal(pert, th) and np.all(eps == 0)

    def test_same_seed_same_draw(self):
        th = default_theta(1.0, 0.4)
        a = perturb(th, ExplorationConfig(), 123)
        b = perturb(th, ExplorationConfig(), 123)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_sample_variance_matches(self):
        cfg = ExplorationConfig()
        th = default_theta(0.0, 0.5)
        eps = np.stack([perturb(th, cfg, rollout_seed(0, 0, i))[1] for i in range(100_000)])
        ratio = eps[:, 1:].var(axis=0) / cfg.sigma_hat[1:]
        assert np.all(np.abs(ratio - 1) < 0.05)
        # release phase 10 sigma from its bounds: clipping is negligible
        assert abs(eps[:, 0].var() / cfg.sigma_hat[0] - 1) < 0.05

    def test_seeds_distinct(self):
        seeds = {rollout_seed(0, u, i) for u in range(20) for i in range(20)}
        assert len(seeds) == 400

    @pytest.mark.property
    @settings(max_examples=200)
    @given(st.floats(0.0, 1.0), st.integers(0, 2**32))
    def test_release_phase_stays_in_unit_interval(self, lam, seed):
        th = default_theta(0.5, lam)
        cfg = ExplorationConfig(sigma_hat=default_sigma_hat(lambda_var=1.0))
        pert, eps = perturb(th, cfg, seed)
        assert 0.0 <= pert[0] <= 1.0
        assert np.array_equal(pert, th + eps)


class TestPowerUpdate:
    def test_hand_worked(self):
        th = np.zeros(3)
        rs = [rollout([1, 0, 0], 1.0), rollout([0, 2, 0], 3.0)]
        assert np.allclose(power_update(th, rs), [0.25, 1.5, 0.0], atol=1e-15)

    def test_single_rollout_jumps_to_it(self):
        th = np.array([0.5, 1.0, -1.0])
        eps = np.array([0.1, -0.3, 2.0])
        assert np.allclose(power_update(th, [rollout(eps, 0.7)]), th + eps, atol=1e-15)

    def test_zero_returns_stall(self):
        th = np.arange(3.0)
        out = power_update(th, [rollout([1, 1, 1], 0.0), rollout([2, 2, 2], 0.0)])
        assert np.array_equal(out, th)

    @pytest.mark.parametrize("q", [-0.1, math.nan, math.inf])
    def test_bad_returns(self, q):
        with pytest.raises(ValueError):
            power_update(np.zeros(3), [rollout([1, 0, 0], q)])

    def test_empty(self):
        with pytest.raises(ValueError):
            power_update(np.zeros(3), [])

    def test_matches_explicit_sum(self):
        rng = np.random.default_rng(4)
        th = rng.normal(size=POLICY_DIM)
        eps = rng.normal(size=(10, POLICY_DIM))
        q = rng.uniform(0, 1, size=10)
        oracle = th.copy()
        for j in range(POLICY_DIM):
            oracle[j] += math.fsum(eps[i, j] * q[i] for i in range(10)) / math.fsum(q)
        got = power_update(th, [rollout(e, v) for e, v in zip(eps, q)])
        assert np.allclose(got, oracle, rtol=1e-12, atol=1e-12)

    @pytest.mark.property
    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.lists(st.floats(-10, 10), min_size=4, max_size=4),
                              st.floats(1e-3, 1.0)), min_size=1, max_size=12),
           st.lists(st.floats(-10, 10), min_size=4, max_size=4))
    def test_new_policy_in_convex_hull_of_rollouts(self, data, theta):
        th = np.array(theta)
        rs = [rollout(e, q) for e, q in data]
        new = power_update(th, rs)
        pts = th + np.array([e for e, _ in data])
        assert np.all(new >= pts.min(axis=0) - 1e-9) and np.all(new <= pts.max(axis=0) + 1e-9)

    @pytest.mark.property
    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
                              st.floats(1e-3, 1.0)), min_size=1, max_size=8),
           st.lists(st.floats(-100, 100), min_size=3, max_size=3), st.floats(1e-3, 1e3))
    def test_translation_and_return_scale_equivariance(self, data, shift, scale):
        rs = [rollout(e, q) for e, q in data]
        scaled = [rollout(e, q * scale) for e, q in data]
        base = power_update(np.zeros(3), rs)
        moved = power_update(np.array(shift), scaled)
        assert np.allclose(moved - np.array(shift), base, rtol=1e-9, atol=1e-9)


class TestImportanceSelect:
    def test_top_k(self):
        rs = [rollout([i], q) for i, q in enumerate([0.1, 0.9, 0.5, 0.7])]
        assert [r.epsilon[0] for r in importance_select(rs, 2)] == [1, 3]

    def test_ties_prefer_newer(self):
        rs = [rollout([i], 0.5) for i in range(4)]
        assert [r.epsilon[0] for r in importance_select(rs, 2)] == [3, 2]

    def test_k_larger_than_history(self):
        rs = [rollout([i], 0.2) for i in range(3)]
        assert len(importance_select(rs, 10)) == 3

    def test_invalid(self):
        with pytest.raises(ValueError):
            importance_select([], 3)
        with pytest.raises(ValueError):
            importance_select([rollout([0], 1.0)], 0)

    @pytest.mark.property
    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.integers(1, 60))
    def test_selected_dominate_rejected(self, returns, k):
        rs = [rollout([i], q) for i, q in enumerate(returns)]
        chosen = importance_select(rs, k)
        assert len(chosen) == min(k, len(rs))
        ids = {int(r.epsilon[0]) for r in chosen}
        worst_chosen = min(r.return_value for r in chosen)
        rest = [q for i, q in enumerate(returns) if i not in ids]
        assert all(q <= worst_chosen for q in rest)


class TestLearnPolicy:
    def test_already_solved_uses_no_updates(self):
        cold = learn_policy(Task.from_angle(2.5), default_theta(), seed=0)
        assert cold.converged
        again = learn_policy(Task.from_angle(2.5), cold.final_theta, seed=9)
        assert again.updates_used == 0 and again.rollouts_used == 0 and again.converged
        assert np.array_equal(again.final_theta, cold.final_theta)

    def test_zero_budget(self):
        th = default_theta()
        res = learn_policy(Task.from_angle(1.0), th, ExplorationConfig(max_updates=0), seed=0)
        assert res.updates_used == 0 and not res.converged
        assert np.array_equal(res.final_theta, th) and len(res.history) == 1

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_cold_start_converges(self, seed):
        res = learn_policy(Task.from_angle(2.5), default_theta(), seed=seed)
        assert res.converged and res.updates_used <= 60
        assert res.best_distance <= 0.05
        assert SIM.throw(res.final_theta, Task.from_angle(2.5)).distance_to_target == res.best_distance

    def test_best_distance_never_increases(self):
        res = learn_policy(Task.from_angle(0.6), default_theta(), ExplorationConfig(max_updates=10),
                           seed=3)
        best = [p["best_distance"] for p in res.progress]
        assert all(b >= c for b, c in zip(best, best[1:]))
        assert res.rollouts_used == 20 * res.updates_used

    def test_deterministic(self):
        cfg = ExplorationConfig(max_updates=5)
        a = learn_policy(Task.from_angle(1.2), default_theta(), cfg, seed=11)
        b = learn_policy(Task.from_angle(1.2), default_theta(), cfg, seed=11)
        assert np.array_equal(a.final_theta, b.final_theta) and a.history == b.history

    def test_keep_rollouts(self):
        cfg = ExplorationConfig(max_updates=2)
        res = learn_policy(Task.from_angle(1.2), default_theta(), cfg, seed=0, keep_rollouts=True)
        assert len(res.rollouts) == res.rollouts_used
        assert all(r.outcome is not None for r in res.rollouts)

    def test_bad_init_shape(self):
        with pytest.raises(ValueError):
            learn_policy(Task.from_angle(1.0), np.zeros(5))
