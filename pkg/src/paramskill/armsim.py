"""Planar 3-link dart-throwing arm in a 4 m x 3 m room.

Only the middle joint is motorised. The arm hangs from a pivot in the middle
of the room (on the back wall, at mid-height); targets sit on the left wall,
the ceiling or the right wall and are indexed by their bearing from the pivot.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .dmp import DmpConstants, integrate_dmp, validate_theta


class NumericDomainError(ArithmeticError):
    """Simulation state became (or was given as) non-finite."""


class GeometryError(ValueError):
    """A point or trajectory is inconsistent with the room geometry."""


@dataclass(frozen=True)
class ArmConfig:
    link_lengths: tuple = (0.5, 0.4, 0.3)
    link_masses: tuple = (2.0, 0.4, 0.2)
    gravity: float = 9.81
    joint_damping: tuple = (0.05, 0.0, 0.05)
    torque_limit: float = 20.0
    dt: float = 1e-3
    room_width: float = 4.0
    room_height: float = 3.0
    base_position: tuple = (2.0, 1.5)
    initial_angles: tuple = (-math.pi / 2, 0.0, 0.0)
    horizon: float = 2.0
    no_release_distance: float = 10.0
    reward_scale: float = 3.0
    # joint-2 range stops; inf disables them
    elbow_limit: float = 2.3
    stop_stiffness: float = 2000.0
    stop_damping: float = 20.0

    def __post_init__(self):
        for name in ("link_lengths", "link_masses", "joint_damping", "base_position", "initial_angles"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.link_lengths) != 3 or len(self.link_masses) != 3 or len(self.joint_damping) != 3:
            raise ValueError("the arm has exactly three links")
        if min(self.link_lengths) <= 0 or min(self.link_masses) <= 0:
            raise ValueError("link lengths and masses must be positive")
        if min(self.joint_damping) < 0:
            raise ValueError("joint damping must be nonnegative")
        if self.elbow_limit <= 0 or self.stop_stiffness < 0 or self.stop_damping < 0:
            raise ValueError("elbow_limit must be positive, stop gains nonnegative")
        if self.dt <= 0 or self.torque_limit <= 0 or self.horizon <= 0:
            raise ValueError("dt, torque_limit and horizon must be positive")
        if self.room_width <= 0 or self.room_height <= 0:
            raise ValueError("room dimensions must be positive")
        bx, by = self.base_position
        if not (0 < bx < self.room_width and 0 < by < self.room_height):
            raise GeometryError("arm base must be inside the room")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def kernel_args(self):
        return (np.array(self.link_lengths), np.array(self.link_masses), float(self.gravity),
                np.array(self.joint_damping), self.stop_args())

    def stop_args(self) -> np.ndarray:
        lim = self.elbow_limit if math.isfinite(self.elbow_limit) else 1e300
        return np.array([lim, self.stop_stiffness, self.stop_damping])

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ArmConfig":
        return cls(**d)


@dataclass(frozen=True)
class PidGains:
    kp: float = 60.0
    ki: float = 0.0
    kd: float = 8.0

    def __post_init__(self):
        if self.kp <= 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("PID gains: kp > 0, ki >= 0, kd >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ArmState:
    joint_angles: np.ndarray
    joint_velocities: np.ndarray
    dart_held: bool = True

    def __post_init__(self):
        object.__setattr__(self, "joint_angles", np.asarray(self.joint_angles, dtype=float).copy())
        object.__setattr__(self, "joint_velocities", np.asarray(self.joint_velocities, dtype=float).copy())

    @classmethod
    def initial(cls, cfg: ArmConfig) -> "ArmState":
        return cls(np.array(cfg.initial_angles), np.zeros(3), True)

    def as_vector(self) -> np.ndarray:
        """The 7-dimensional state: angles, angular velocities, hold flag."""
        return np.concatenate((self.joint_angles, self.joint_velocities, [1.0 if self.dart_held else 0.0]))


def _ray_to_boundary(angle: float, cfg: ArmConfig) -> np.ndarray:
    bx, by = cfg.base_position
    c, s = math.cos(angle), math.sin(angle)
    best_t, point = math.inf, None
    if c > 0:
        t = (cfg.room_width - bx) / c
        if t < best_t:
            best_t, point = t, (cfg.room_width, by + t * s)
    if c < 0:
        t = -bx / c
        if t < best_t:
            best_t, point = t, (0.0, by + t * s)
    if s > 0:
        t = (cfg.room_height - by) / s
        if t <= best_t:
            best_t, point = t, (bx + t * c, cfg.room_height)
    x, y = point
    # snap onto the surface that was hit first
    if point[1] == cfg.room_height:
        x = min(max(x, 0.0), cfg.room_width)
    else:
        y = min(max(y, 0.0), cfg.room_height)
    return np.array([x, y])


@dataclass(frozen=True)
class Task:
    """A target on the walls or ceiling, identified by its bearing from the arm base."""

    angle: float
    surface_point: np.ndarray = field(compare=False)

    @classmethod
    def from_angle(cls, angle: float, cfg: ArmConfig | None = None) -> "Task":
        cfg = cfg or ArmConfig()
        angle = float(angle)
        if not (0.0 <= angle <= math.pi) or not math.isfinite(angle):
            raise GeometryError(f"task angle {angle!r} outside [0, pi]")
        return cls(angle, _ray_to_boundary(angle, cfg))

    def surface(self, cfg: ArmConfig | None = None) -> str:
        cfg = cfg or ArmConfig()
        x, y = self.surface_point
        if y == cfg.room_height:
            return "ceiling"
        return "right" if x == cfg.room_width else "left"


@dataclass
class ThrowOutcome:
    landing_point: np.ndarray
    distance_to_target: float
    released: bool
    release_state: np.ndarray
    release_time: float
    surface: str
    trajectory: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "landing_x": float(self.landing_point[0]),
            "landing_y": float(self.landing_point[1]),
            "distance_to_target": float(self.distance_to_target),
            "released": bool(self.released),
            "release_time": float(self.release_time),
            "release_state": [float(v) for v in self.release_state],
            "surface": self.surface,
        }


def pid_torque(desired_angle: float, desired_velocity: float, state: ArmState, gains: PidGains,
               integrator: float, dt: float = 1e-3) -> tuple[float, float]:
    """Unclamped PID torque for joint 2 and the updated error integral."""
    err = desired_angle - state.joint_angles[1]
    torque = gains.kp * err + gains.ki * integrator + gains.kd * (desired_velocity - state.joint_velocities[1])
    return float(torque), float(integrator + err * dt)


def step(state: ArmState, torque: float, cfg: ArmConfig) -> ArmState:
    """Advance the arm by one RK4 step of ``cfg.dt`` with clamped joint-2 torque."""
    q = state.joint_angles
    qd = state.joint_velocities
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd)) and math.isfinite(torque)):
        raise NumericDomainError("non-finite arm state or torque")
    u = min(max(float(torque), -cfg.torque_limit), cfg.torque_limit)
    qn, vn = _kernels.rk4_step(q.copy(), qd.copy(), u, cfg.dt, *cfg.kernel_args())
    if not (np.all(np.isfinite(qn)) and np.all(np.isfinite(vn))):
        raise NumericDomainError("arm state diverged")
    return ArmState(qn, vn, state.dart_held)


def tip_state(state: ArmState, cfg: ArmConfig) -> np.ndarray:
    """Tip position and velocity (x, y, vx, vy)."""
    return np.array(_kernels.tip_kinematics(state.joint_angles, state.joint_velocities,
                                            np.array(cfg.link_lengths), np.array(cfg.base_position)))


def _first_hit(pos, vel, cfg: ArmConfig):
    x, y = float(pos[0]), float(pos[1])
    vx, vy = float(vel[0]), float(vel[1])
    g = float(cfg.gravity)
    width, height = cfg.room_width, cfg.room_height
    hits = []
    if vx > 0:
        hits.append(((width - x) / vx, "right"))
    elif vx < 0:
        hits.append((-x / vx, "left"))
    # ceiling: y + vy t - g t^2 / 2 = height, earliest root
    if vy > 0:
        if g > 0:
            disc = vy * vy - 2.0 * g * (height - y)
            if disc >= 0:
                hits.append((2.0 * (height - y) / (vy + math.sqrt(disc)), "ceiling"))
        else:
            hits.append(((height - y) / vy, "ceiling"))
    # floor: y + vy t - g t^2 / 2 = 0, positive root
    if g > 0:
        hits.append((2.0 * y / (math.sqrt(vy * vy + 2.0 * g * y) - vy), "floor"))
    elif vy < 0:
        hits.append((-y / vy, "floor"))
    if not hits:
        raise GeometryError("dart never reaches the room boundary")
    return min(hits, key=lambda h: h[0])


def ballistic_impact(release_state, cfg: ArmConfig) -> tuple[np.ndarray, str, float]:
    """First boundary intersection of a drag-free projectile.

    ``release_state`` is (x, y, vx, vy). Returns the landing point, the name of
    the surface hit (``left``, ``right``, ``ceiling`` or ``floor``) and the
    flight time.
    """
    rs = np.asarray(release_state, dtype=float)
    x, y = rs[0], rs[1]
    if not np.all(np.isfinite(rs)):
        raise NumericDomainError("non-finite release state")
    if not (0.0 < x < cfg.room_width and 0.0 < y < cfg.room_height):
        raise GeometryError(f"release point ({x}, {y}) is not strictly inside the room")
    t, surface = _first_hit(rs[:2], rs[2:], cfg)
    px = x + rs[2] * t
    py = y + rs[3] * t - 0.5 * cfg.gravity * t * t
    if surface == "right":
        px = cfg.room_width
    elif surface == "left":
        px = 0.0
    elif surface == "ceiling":
        py = cfg.room_height
    else:
        py = 0.0
    px = min(max(px, 0.0), cfg.room_width)
    py = min(max(py, 0.0), cfg.room_height)
    return np.array([px, py]), surface, float(t)


def simulate_throw(theta, task: Task, cfg: ArmConfig | None = None, gains: PidGains | None = None,
                   dmp_consts: DmpConstants | None = None, noise=None,
                   record: bool = False) -> ThrowOutcome:
    """Execute one throw of policy ``theta`` (optionally shifted by ``noise``) at ``task``."""
    cfg = cfg or ArmConfig()
    gains = gains or PidGains()
    dmp_consts = dmp_consts or DmpConstants()
    theta = np.asarray(theta, dtype=float)
    if noise is not None:
        theta = theta + np.asarray(noise, dtype=float)
    theta = validate_theta(theta, dmp_consts.num_bases)
    q0 = np.array(cfg.initial_angles)
    rel_idx = _kernels.release_index(float(theta[0]), cfg.n_steps, cfg.dt,
                                     dmp_consts.phase_alpha, dmp_consts.temporal_scale)
    if rel_idx < 0 and not record:
        # the outcome of a throw that never lets go does not depend on the swing
        return ThrowOutcome(np.array([math.nan, math.nan]), float(cfg.no_release_distance), False,
                            np.full(4, math.nan), math.nan, "none", None)
    n_sim = cfg.n_steps if rel_idx < 0 else rel_idx
    traj = integrate_dmp(theta, q0[1], n_sim * cfg.dt, dmp_consts, cfg.dt) if n_sim > 0 else None
    if traj is None:
        phase_arr = np.ones(1)
        ang = np.array([q0[1]])
        vel = np.zeros(1)
    else:
        phase_arr, ang, vel = traj.phase, traj.angle, traj.velocity
    status, idx, rel, _, _, log = _kernels.throw_loop(
        float(theta[0]), phase_arr, ang, vel, q0, np.zeros(3), cfg.dt,
        *cfg.kernel_args(), float(gains.kp), float(gains.ki), float(gains.kd),
        float(cfg.torque_limit), np.array(cfg.base_position), record)
    if status != _kernels.STATUS_OK:
        raise NumericDomainError("arm simulation diverged")
    trajectory = log[: idx + 1 if idx >= 0 else len(log)] if record else None
    if idx < 0:
        return ThrowOutcome(np.array([math.nan, math.nan]), float(cfg.no_release_distance), False,
                            np.full(4, math.nan), math.nan, "none", trajectory)
    landing, surface, _ = ballistic_impact(rel, cfg)
    dist = float(np.hypot(*(landing - task.surface_point)))
    return ThrowOutcome(landing, dist, True, rel.copy(), idx * cfg.dt, surface, trajectory)


def throw_reward(outcome: ThrowOutcome, cfg: ArmConfig | None = None) -> float:
    """Terminal reward exp(-c * distance); strictly positive and at most 1."""
    cfg = cfg or ArmConfig()
    return math.exp(-cfg.reward_scale * outcome.distance_to_target)
