"""Discrete dynamic movement primitive for the actuated joint.

A policy is the 37-vector ``[lambda, goal, w_1 .. w_35]``: the phase value at
which the dart is released, the DMP goal angle and the forcing-term weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

NUM_BASES = 35
POLICY_DIM = NUM_BASES + 2
LAMBDA_INDEX = 0
GOAL_INDEX = 1


class ParameterDomainError(ValueError):
    """A policy or DMP parameter lies outside its admissible domain."""


def basis_layout(num_bases: int, alpha: float, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Centers equally spaced in time over one movement period, decreasing in phase.

    Widths make neighbouring Gaussians cross at half height.
    """
    idx = np.arange(num_bases, dtype=float)
    centers = np.exp(-alpha * idx / ((num_bases - 1) * kappa))
    gaps = np.abs(np.diff(centers))
    gaps = np.append(gaps, gaps[-1])
    widths = 4.0 * math.log(2.0) / gaps**2
    return centers, widths


@dataclass(frozen=True)
class DmpConstants:
    spring_k: float = 100.0
    damping_q: float | None = None
    temporal_scale: float = 1.0
    phase_alpha: float = 4.0
    num_bases: int = NUM_BASES
    centers: np.ndarray = field(default=None, repr=False, compare=False)
    widths: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.spring_k <= 0 or self.temporal_scale <= 0 or self.phase_alpha <= 0:
            raise ValueError("spring_k, temporal_scale and phase_alpha must be positive")
        if self.num_bases < 2:
            raise ValueError("at least two basis functions required")
        if self.damping_q is None:
            object.__setattr__(self, "damping_q", 2.0 * math.sqrt(self.spring_k))
        if self.centers is None or self.widths is None:
            c, h = basis_layout(self.num_bases, self.phase_alpha, self.temporal_scale)
            object.__setattr__(self, "centers", c)
            object.__setattr__(self, "widths", h)
        c = np.asarray(self.centers, dtype=float)
        h = np.asarray(self.widths, dtype=float)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", h)
        if c.shape != (self.num_bases,) or h.shape != (self.num_bases,):
            raise ValueError("centers and widths must have num_bases entries")
        if np.any(c <= 0) or np.any(c > 1):
            raise ValueError("basis centers must lie in (0, 1]")
        d = np.diff(c)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("basis centers must be strictly monotone")
        if np.any(h <= 0):
            raise ValueError("basis widths must be positive")

    def to_dict(self) -> dict:
        return {
            "spring_k": self.spring_k,
            "damping_q": self.damping_q,
            "temporal_scale": self.temporal_scale,
            "phase_alpha": self.phase_alpha,
            "num_bases": self.num_bases,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DmpConstants":
        return cls(**{k: d[k] for k in ("spring_k", "damping_q", "temporal_scale",
                                        "phase_alpha", "num_bases") if k in d})


@dataclass(frozen=True)
class PolicyVector:
    lambda_release: float
    goal: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        validate_theta(self.to_array())

    def to_array(self) -> np.ndarray:
        return np.concatenate(([self.lambda_release, self.goal], self.weights))

    @classmethod
    def from_array(cls, theta) -> "PolicyVector":
        theta = np.asarray(theta, dtype=float)
        return cls(float(theta[0]), float(theta[1]), theta[2:].copy())


def validate_theta(theta, num_bases: int = NUM_BASES) -> np.ndarray:
    """Check shape, finiteness and the release-phase range; return a float array."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (num_bases + 2,):
        raise ParameterDomainError(f"policy vector must have {num_bases + 2} entries, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ParameterDomainError("policy vector has non-finite entries")
    if not 0.0 <= theta[LAMBDA_INDEX] <= 1.0:
        raise ParameterDomainError(f"release phase {theta[LAMBDA_INDEX]!r} outside [0, 1]")
    return theta


def default_theta(goal: float = 0.0, lambda_release: float = 0.5) -> np.ndarray:
    theta = np.zeros(POLICY_DIM)
    theta[LAMBDA_INDEX] = lambda_release
    theta[GOAL_INDEX] = goal
    return theta


def canonical_phase(t, consts: DmpConstants):
    """Exact phase s(t) = exp(-alpha t / kappa), scalar or array."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("phase is defined for t >= 0")
    s = np.exp(-consts.phase_alpha * t / consts.temporal_scale)
    return float(s) if s.ndim == 0 else s


def forcing(s: float, weights, consts: DmpConstants) -> float:
    """Normalized Gaussian-basis forcing term; 0 where every basis underflows."""
    w = np.ascontiguousarray(weights, dtype=float)
    return _kernels.forcing(float(s), w, consts.centers, consts.widths)


@dataclass(frozen=True)
class DesiredTrajectory:
    time: np.ndarray
    phase: np.ndarray
    angle: np.ndarray
    velocity: np.ndarray

    def __len__(self):
        return self.time.shape[0]


def integrate_dmp(theta, x0: float, duration: float, consts: DmpConstants,
                  dt: float) -> DesiredTrajectory:
    """Integrate the transformation system driven by the canonical phase.

    The forcing term is scaled by ``goal - x0``; when the goal equals the start
    angle the forcing vanishes and the joint stays at rest.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (consts.num_bases + 2,) or not np.all(np.isfinite(theta)):
        raise ParameterDomainError("policy vector must be finite with num_bases + 2 entries")
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    n_steps = int(round(duration / dt))
    t, s, x, xd = _kernels.integrate_dmp(
        float(theta[GOAL_INDEX]), np.ascontiguousarray(theta[2:]), float(x0), n_steps, float(dt),
        consts.spring_k, consts.damping_q, consts.temporal_scale, consts.phase_alpha,
        consts.centers, consts.widths)
    return DesiredTrajectory(t, s, x, xd)
