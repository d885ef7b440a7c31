"""IMU dead reckoning into a time-indexed camera state log.

Gyro channels ``(r, p, y)`` map to the x, y and z axes, so a yaw rate
``omega[2]`` advances ``theta.psi``. Acceleration is held constant over each
sample interval and displacement uses ``dr = v_L*dt + a*dt**2/2``, which is
exact for piecewise-constant acceleration. (The often-quoted form
``dr = v_L + a*dt/2`` is dimensionally inconsistent and is not used.)
"""
from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidIntervalError, OrderingError, OutOfRangeError
from .geometry import EulerAngles, euler_to_rotation


class FrameMode(str, enum.Enum):
    BODY_FRAME_PAPER = "body_frame_paper"
    WORLD_FRAME = "world_frame"


def _vec3(x) -> np.ndarray:
    a = np.array(x, dtype=float).reshape(3)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ImuSample:
    t: float
    omega: np.ndarray  # rad/s, (r, p, y) -> (x, y, z)
    accel: np.ndarray  # m/s^2

    def __post_init__(self):
        object.__setattr__(self, "omega", _vec3(self.omega))
        object.__setattr__(self, "accel", _vec3(self.accel))


@dataclass(frozen=True)
class CameraState:
    t: float
    theta: EulerAngles
    vel: np.ndarray
    disp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", EulerAngles(*self.theta))
        object.__setattr__(self, "vel", _vec3(self.vel))
        object.__setattr__(self, "disp", _vec3(self.disp))


@dataclass(frozen=True)
class RelativePose:
    rotation: EulerAngles
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", EulerAngles(*self.rotation))
        object.__setattr__(self, "translation", _vec3(self.translation))

    @classmethod
    def identity(cls):
        return cls(EulerAngles(), np.zeros(3))


@dataclass(frozen=True)
class IntegratorConfig:
    initial_theta: EulerAngles = EulerAngles()
    initial_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame_mode: FrameMode = FrameMode.BODY_FRAME_PAPER
    max_gap: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "initial_theta", EulerAngles(*self.initial_theta))
        object.__setattr__(self, "initial_vel", _vec3(self.initial_vel))
        object.__setattr__(self, "gravity", _vec3(self.gravity))
        object.__setattr__(self, "frame_mode", FrameMode(self.frame_mode))

    def initial_state(self) -> CameraState:
        return CameraState(0.0, self.initial_theta, self.initial_vel, np.zeros(3))


class StateLog:
    """Immutable, time-ordered sequence of :class:`CameraState`."""

    def __init__(self, states: Sequence[CameraState], max_gap: float = 0.5,
                 frame_mode: FrameMode = FrameMode.BODY_FRAME_PAPER):
        if not states:
            raise OrderingError("a state log needs at least one state")
        self._states = tuple(states)
        self._times = [s.t for s in self._states]
        for i in range(1, len(self._times)):
            if not self._times[i] > self._times[i - 1]:
                raise OrderingError(f"state timestamps not increasing at index {i}", index=i)
        self.max_gap = max_gap
        self.frame_mode = FrameMode(frame_mode)

    def __len__(self):
        return len(self._states)

    def __getitem__(self, i):
        return self._states[i]

    def __iter__(self):
        return iter(self._states)

    @property
    def times(self) -> list[float]:
        return list(self._times)


def integrate_step(prev: CameraState, sample: ImuSample, dt: float, cfg: IntegratorConfig) -> CameraState:
    if not (dt > 0) or not math.isfinite(dt):
        raise InvalidIntervalError(f"dt must be positive and finite, got {dt!r}")
    if not (np.all(np.isfinite(sample.omega)) and np.all(np.isfinite(sample.accel))):
        raise InvalidArgumentError(f"non-finite IMU sample at t={sample.t!r}")

    wr, wp, wy = sample.omega * dt
    theta = EulerAngles(prev.theta.psi + wy, prev.theta.theta + wp, prev.theta.phi + wr)

    if cfg.frame_mode is FrameMode.WORLD_FRAME:
        # passive matrix transposed -> body-to-world
        accel = euler_to_rotation(prev.theta).T @ sample.accel - cfg.gravity
    else:
        accel = sample.accel - cfg.gravity

    vel = prev.vel + accel * dt
    disp = prev.disp + (prev.vel * dt + 0.5 * accel * dt * dt)
    return CameraState(prev.t + dt, theta, vel, disp)


def build_log(samples: Sequence[ImuSample], cfg: IntegratorConfig | None = None) -> StateLog:
    """Integrate ``samples`` starting from the configured state at t = 0."""
    cfg = cfg or IntegratorConfig()
    if len(samples) == 0:
        raise OrderingError("no IMU samples", index=0)
    states = [cfg.initial_state()]
    t_prev = 0.0
    for i, s in enumerate(samples):
        if not s.t > t_prev:
            raise OrderingError(
                f"IMU sample {i} at t={s.t!r} does not follow t={t_prev!r}", index=i)
        st = integrate_step(states[-1], s, s.t - t_prev, cfg)
        # keep the exact sample timestamp rather than the accumulated sum
        states.append(CameraState(s.t, st.theta, st.vel, st.disp))
        t_prev = s.t
    return StateLog(states, max_gap=cfg.max_gap, frame_mode=cfg.frame_mode)


def state_at(log: StateLog, t: float, max_gap: float | None = None) -> CameraState:
    """Nearest logged state to ``t``; ties go to the earlier state."""
    max_gap = log.max_gap if max_gap is None else max_gap
    times = log._times
    i = bisect.bisect_left(times, t)
    best = None
    if i < len(times):
        best = i
    if i > 0 and (best is None or t - times[i - 1] <= times[best] - t):
        best = i - 1
    if abs(times[best] - t) > max_gap:
        raise OutOfRangeError(
            f"t={t!r} is {abs(times[best] - t):.3g} s from the nearest state (max_gap {max_gap})")
    return log[best]


def relative_pose(log: StateLog, t1: float, t2: float) -> RelativePose:
    """Camera motion between ``t1`` and ``t2``.

    The rotation is the componentwise Euler difference. The translation is
    ``r2 - r1``; for world-frame logs it is additionally rotated into the
    camera frame at ``t1``.
    """
    if t1 > t2:
        raise InvalidArgumentError(f"t1={t1!r} is after t2={t2!r}")
    s1 = state_at(log, t1)
    s2 = state_at(log, t2)
    translation = s2.disp - s1.disp
    if log.frame_mode is FrameMode.WORLD_FRAME:
        translation = euler_to_rotation(s1.theta) @ translation
    return RelativePose(s2.theta - s1.theta, translation)
