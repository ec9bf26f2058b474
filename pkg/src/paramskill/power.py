"""Episodic PoWER policy search over the 37-dimensional throw policy.

Each rollout perturbs the whole parameter vector once with diagonal Gaussian
noise, executes the throw, and scores it with the terminal reward. An update
moves the policy to the return-weighted mean of the best recent perturbations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .armsim import ArmConfig, PidGains, Task, ThrowOutcome, simulate_throw, throw_reward
from .dmp import LAMBDA_INDEX, NUM_BASES, POLICY_DIM, DmpConstants

log = logging.getLogger(__name__)


def default_sigma_hat(lambda_var: float = 0.0025, goal_var: float = 1.0,
                      weight_var: float = 0.25, num_bases: int = NUM_BASES) -> np.ndarray:
    return np.concatenate(([lambda_var, goal_var], np.full(num_bases, weight_var)))


@dataclass(frozen=True)
class ExplorationConfig:
    sigma_hat: np.ndarray = field(default_factory=default_sigma_hat)
    rollouts_per_update: int = 20
    importance_top_k: int = 10
    history_batches: int = 3
    max_updates: int = 60
    success_threshold: float = 0.05
    stall_batches: int = 5
    stall_inflation: float = 4.0

    def __post_init__(self):
        sig = np.asarray(self.sigma_hat, dtype=float)
        object.__setattr__(self, "sigma_hat", sig)
        if sig.ndim != 1 or np.any(sig < 0) or not np.all(np.isfinite(sig)):
            raise ValueError("sigma_hat must be a vector of nonnegative variances")
        if self.rollouts_per_update < 1 or self.history_batches < 1:
            raise ValueError("rollouts_per_update and history_batches must be >= 1")
        if not 1 <= self.importance_top_k <= self.rollouts_per_update * self.history_batches:
            raise ValueError("importance_top_k must lie in [1, rollouts_per_update * history_batches]")
        if self.max_updates < 0 or self.success_threshold <= 0:
            raise ValueError("max_updates >= 0 and success_threshold > 0 required")

    def to_dict(self) -> dict:
        return {
            "sigma_hat": [float(v) for v in self.sigma_hat],
            "rollouts_per_update": self.rollouts_per_update,
            "importance_top_k": self.importance_top_k,
            "history_batches": self.history_batches,
            "max_updates": self.max_updates,
            "success_threshold": self.success_threshold,
            "stall_batches": self.stall_batches,
            "stall_inflation": self.stall_inflation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExplorationConfig":
        return cls(**d)


@dataclass(frozen=True)
class SimContext:
    """Everything needed to execute a throw besides the policy and the task."""

    arm: ArmConfig = field(default_factory=ArmConfig)
    gains: PidGains = field(default_factory=PidGains)
    dmp: DmpConstants = field(default_factory=DmpConstants)

    def throw(self, theta, task: Task) -> ThrowOutcome:
        return simulate_throw(theta, task, self.arm, self.gains, self.dmp)

    def reward(self, outcome: ThrowOutcome) -> float:
        return throw_reward(outcome, self.arm)


@dataclass
class Rollout:
    perturbed_theta: np.ndarray
    epsilon: np.ndarray
    outcome: ThrowOutcome | None
    return_value: float
    seed: int

    def rebased(self, theta) -> "Rollout":
        """The same execution expressed as a perturbation of ``theta``."""
        return Rollout(self.perturbed_theta, self.perturbed_theta - theta, self.outcome,
                       self.return_value, self.seed)


@dataclass
class LearnResult:
    final_theta: np.ndarray
    updates_used: int
    rollouts_used: int
    best_distance: float
    converged: bool
    history: list = field(default_factory=list)
    progress: list = field(default_factory=list)


def rollout_seed(base_seed: int, update: int, index: int) -> int:
    """Counter-based seed for rollout ``index`` of batch ``update``."""
    ss = np.random.SeedSequence([int(base_seed), int(update), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def perturb(theta, cfg: ExplorationConfig, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw eps ~ N(0, diag(sigma_hat)) and return (theta + eps, eps).

    The release phase is kept inside [0, 1]; eps is adjusted so that the
    returned pair always satisfies ``perturbed == theta + eps``.
    """
    theta = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(theta.shape[0]) * np.sqrt(cfg.sigma_hat)
    perturbed = theta + eps
    lam = perturbed[LAMBDA_INDEX]
    if lam < 0.0 or lam > 1.0:
        perturbed[LAMBDA_INDEX] = min(max(lam, 0.0), 1.0)
        eps[LAMBDA_INDEX] = perturbed[LAMBDA_INDEX] - theta[LAMBDA_INDEX]
    return perturbed, eps


def power_update(theta, rollouts, cfg: ExplorationConfig | None = None) -> np.ndarray:
    """theta + sum(eps * Q) / sum(Q) over ``rollouts``.

    If every return is zero the update is stalled and ``theta`` is returned
    unchanged (a warning is logged).
    """
    theta = np.asarray(theta, dtype=float)
    if len(rollouts) == 0:
        raise ValueError("power_update needs at least one rollout")
    q = np.array([r.return_value for r in rollouts], dtype=float)
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise ValueError("returns must be finite and nonnegative")
    total = q.sum()
    if total <= 0.0:
        log.warning("stalled PoWER update: all returns are zero")
        return theta.copy()
    eps = np.stack([np.asarray(r.epsilon, dtype=float) for r in rollouts])
    return theta + (q @ eps) / total


def importance_select(history, k: int) -> list:
    """The ``k`` highest-return rollouts; on equal returns the newer one wins."""
    if len(history) == 0:
        raise ValueError("importance_select on an empty history")
    if k < 1:
        raise ValueError("k must be >= 1")
    order = sorted(range(len(history)), key=lambda i: (-history[i].return_value, -i))
    return [history[i] for i in order[:k]]


def _evaluate(theta, task, sim: SimContext) -> float:
    return sim.throw(theta, task).distance_to_target


def learn_policy(task: Task, init_theta, cfg: ExplorationConfig | None = None,
                 sim: SimContext | None = None, seed: int = 0,
                 keep_rollouts: bool = False) -> LearnResult:
    """Run PoWER from ``init_theta`` until the unperturbed policy hits within threshold.

    The mean policy is evaluated before the first update and after each one;
    ``max_updates`` exhaustion returns ``converged=False`` with the best policy
    seen so far.
    """
    cfg = cfg or ExplorationConfig()
    sim = sim or SimContext()
    theta = np.array(init_theta, dtype=float)
    if theta.shape != (POLICY_DIM,):
        raise ValueError(f"init_theta must have {POLICY_DIM} entries")
    sigma_scale = 1.0
    dist = _evaluate(theta, task, sim)
    best_theta, best_dist = theta.copy(), dist
    history = [dist]
    progress = []
    window: list[Rollout] = []
    all_rollouts: list[Rollout] = []
    zero_batches = 0
    updates = 0
    n = cfg.rollouts_per_update
    while best_dist > cfg.success_threshold and updates < cfg.max_updates:
        ecfg = cfg if sigma_scale == 1.0 else ExplorationConfig(
            cfg.sigma_hat * sigma_scale, cfg.rollouts_per_update, cfg.importance_top_k,
            cfg.history_batches, cfg.max_updates, cfg.success_threshold,
            cfg.stall_batches, cfg.stall_inflation)
        batch = []
        for r in range(n):
            rs = rollout_seed(seed, updates, r)
            pert, eps = perturb(theta, ecfg, rs)
            outcome = sim.throw(pert, task)
            batch.append(Rollout(pert, eps, outcome if keep_rollouts else None,
                                 sim.reward(outcome), rs))
        if keep_rollouts:
            all_rollouts.extend(batch)
        window.extend(batch)
        window = window[-n * cfg.history_batches:]
        returns = np.array([r.return_value for r in batch])
        if np.all(returns == 0.0):
            zero_batches += 1
            if zero_batches >= cfg.stall_batches:
                sigma_scale *= cfg.stall_inflation
                zero_batches = 0
                log.info("exploration inflated to %gx after stalled batches", sigma_scale)
        else:
            zero_batches = 0
        selected = importance_select([r.rebased(theta) for r in window], cfg.importance_top_k)
        theta = power_update(theta, selected, ecfg)
        theta[LAMBDA_INDEX] = min(max(theta[LAMBDA_INDEX], 0.0), 1.0)
        updates += 1
        dist = _evaluate(theta, task, sim)
        if dist < best_dist:
            best_theta, best_dist = theta.copy(), dist
        history.append(dist)
        progress.append({
            "update": updates,
            "distance": dist,
            "best_distance": best_dist,
            "mean_return": float(returns.mean()),
            "max_return": float(returns.max()),
        })
    result = LearnResult(best_theta, updates, updates * n, best_dist,
                         best_dist <= cfg.success_threshold, history, progress)
    if keep_rollouts:
        result.rollouts = all_rollouts
    return result
