"""Synthetic scenes with exact ground truth.

A scene is a cloud of world points seen by a pinhole camera that follows a
piecewise trajectory. Every segment either holds still, translates along the
camera's optical axis, or yaws about it. Translations accelerate for the
first half of the segment and brake for the second, so the camera starts and
ends at rest and the IMU signal is piecewise constant: the dead-reckoning
integrator is then exact whenever segment boundaries fall on IMU sample
times. The world frame is the camera frame at t = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import InvalidConfigError
from .features import Descriptor, DescriptorKind, FeaturePoint, Frame
from .geometry import DEFAULT_INTRINSICS, CameraIntrinsics, EulerAngles, euler_to_rotation
from .imu_state import ImuSample, RelativePose
from .matcher import MatchReport

SEGMENT_KINDS = ("static", "forward", "backward", "yaw_left", "yaw_right")


@dataclass(frozen=True)
class Segment:
    kind: str
    amount: float = 0.0  # metres for forward/backward, degrees for yaw_*
    duration: float | None = None  # None: equal share of the remaining time


PRESETS = {
    "initial": (Segment("static"),),
    "front1m": (Segment("forward", 1.0),),
    "back1m": (Segment("backward", 1.0),),
    "left30": (Segment("yaw_left", 30.0),),
    "right30": (Segment("yaw_right", 30.0),),
}


@dataclass(frozen=True)
class SceneConfig:
    num_points: int = 300
    trajectory: tuple[Segment, ...] = PRESETS["initial"]
    duration: float = 2.0
    imu_rate: float = 300.0
    frame_rate: float = 30.0
    width: int = 640
    height: int = 480
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    # ((xmin, ymin, zmin), (xmax, ymax, zmax)); None samples the first view's frustum
    volume: tuple | None = None
    depth_range: tuple[float, float] = (2.0, 6.0)
    imu_noise_sigma: tuple[float, float] = (0.0, 0.0)  # gyro rad/s, accel m/s^2
    descriptor_kind: DescriptorKind = DescriptorKind.BINARY
    descriptor_length: int = 32
    descriptor_noise: float = 0.0  # bits flipped per observation, or real sigma
    num_distractors: int = 0  # points that reuse another point's descriptor
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trajectory", tuple(
            s if isinstance(s, Segment) else Segment(*s) for s in self.trajectory))
        object.__setattr__(self, "descriptor_kind", DescriptorKind(self.descriptor_kind))

    def validate(self):
        if self.num_points <= 0:
            raise InvalidConfigError("num_points must be positive")
        if not (self.duration > 0 and self.imu_rate > 0 and self.frame_rate > 0):
            raise InvalidConfigError("duration and rates must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidConfigError("frame size must be positive")
        if self.descriptor_length <= 0:
            raise InvalidConfigError("descriptor_length must be positive")
        if self.descriptor_noise < 0 or min(self.imu_noise_sigma) < 0:
            raise InvalidConfigError("noise levels must be non-negative")
        if self.descriptor_kind is DescriptorKind.BINARY and self.descriptor_noise > 8 * self.descriptor_length:
            raise InvalidConfigError("cannot flip more bits than the descriptor holds")
        if not 0 <= self.num_distractors < self.num_points:
            raise InvalidConfigError("num_distractors must be in [0, num_points)")
        zmin, zmax = self.depth_range
        if not 0 < zmin <= zmax:
            raise InvalidConfigError("depth_range must satisfy 0 < near <= far")
        if not self.trajectory:
            raise InvalidConfigError("trajectory needs at least one segment")
        for s in self.trajectory:
            if s.kind not in SEGMENT_KINDS:
                raise InvalidConfigError(f"unknown trajectory segment {s.kind!r}")
            if s.duration is not None and s.duration <= 0:
                raise InvalidConfigError("segment durations must be positive")
        fixed = sum(s.duration for s in self.trajectory if s.duration is not None)
        if fixed > self.duration + 1e-12:
            raise InvalidConfigError("segment durations exceed the scene duration")
        if fixed < self.duration - 1e-12 and all(s.duration is not None for s in self.trajectory):
            raise InvalidConfigError("segment durations do not cover the scene duration")


def preset_config(name: str, **overrides) -> SceneConfig:
    try:
        trajectory = PRESETS[name]
    except KeyError:
        raise InvalidConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return SceneConfig(trajectory=trajectory, **overrides)


def adversarial_config(seed: int = 0, **overrides) -> SceneConfig:
    """Forward-motion scene with repeated descriptors and observation noise.

    Distractor points copy another point's descriptor, so a global search can
    prefer a look-alike far away from the true position.
    """
    kw = dict(trajectory=PRESETS["front1m"], num_distractors=40, descriptor_noise=6, seed=seed)
    kw.update(overrides)
    return SceneConfig(**kw)


class _Piece(NamedTuple):
    t0: float
    t1: float
    kind: str
    amount: float  # metres or radians, signed
    theta0: EulerAngles
    pos0: np.ndarray


class Trajectory:
    """Analytic camera pose, velocity and IMU signals as functions of time."""

    def __init__(self, segments, duration: float):
        fixed = sum(s.duration for s in segments if s.duration is not None)
        n_free = sum(1 for s in segments if s.duration is None)
        share = (duration - fixed) / n_free if n_free else 0.0
        self.duration = duration
        self.pieces: list[_Piece] = []
        t, theta, pos = 0.0, EulerAngles(), np.zeros(3)
        for s in segments:
            dur = s.duration if s.duration is not None else share
            if s.kind in ("forward", "backward"):
                amount = s.amount if s.kind == "forward" else -s.amount
            elif s.kind in ("yaw_left", "yaw_right"):
                amount = math.radians(s.amount) * (1 if s.kind == "yaw_left" else -1)
            else:
                amount = 0.0
            piece = _Piece(t, t + dur, s.kind, amount, theta, pos)
            self.pieces.append(piece)
            theta, pos = self._eval(piece, dur)[:2]
            t += dur

    def _piece(self, t: float) -> _Piece:
        for p in self.pieces:
            if t < p.t1:
                return p
        return self.pieces[-1]

    @staticmethod
    def _axis(theta: EulerAngles) -> np.ndarray:
        # camera optical axis in world coordinates
        return euler_to_rotation(theta).T @ np.array([0.0, 0.0, 1.0])

    def _eval(self, p: _Piece, tau: float):
        """Pose, body acceleration along z and yaw rate ``tau`` into piece ``p``."""
        T = p.t1 - p.t0
        tau = min(max(tau, 0.0), T)
        if p.kind in ("forward", "backward"):
            acc = 4.0 * p.amount / (T * T)
            if tau <= T / 2:
                s = 0.5 * acc * tau * tau
                a = acc
            else:
                s = p.amount - 0.5 * acc * (T - tau) ** 2
                a = -acc
            return p.theta0, p.pos0 + s * self._axis(p.theta0), a, 0.0
        if p.kind in ("yaw_left", "yaw_right"):
            rate = p.amount / T
            th = EulerAngles(p.theta0.psi + rate * tau, p.theta0.theta, p.theta0.phi)
            return th, p.pos0, 0.0, rate
        return p.theta0, p.pos0, 0.0, 0.0

    def pose(self, t: float) -> tuple[EulerAngles, np.ndarray]:
        p = self._piece(t)
        theta, pos, _, _ = self._eval(p, t - p.t0)
        return theta, np.array(pos, dtype=float)

    def imu(self, t_mid: float) -> tuple[np.ndarray, np.ndarray]:
        """Body-frame angular rate and acceleration in effect at ``t_mid``.

        Rotations are all about the optical axis, so body and world z agree
        and the Euler yaw rate equals the body rate.
        """
        p = self._piece(t_mid)
        _, _, a, rate = self._eval(p, t_mid - p.t0)
        return np.array([0.0, 0.0, rate]), np.array([0.0, 0.0, a])


@dataclass(frozen=True)
class GroundTruth:
    timestamps: tuple[float, ...]
    orientations: tuple[EulerAngles, ...]
    positions: np.ndarray  # (frames, 3) camera centres in the world frame
    points: np.ndarray  # (num_points, 3)
    frame_points: tuple[np.ndarray, ...]  # per frame: feature id -> world point index
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    width: int = 640
    height: int = 480
    _lookup: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self):
        return len(self.timestamps)

    def _point_to_feature(self, j: int) -> dict[int, int]:
        if j not in self._lookup:
            self._lookup[j] = {int(w): fid for fid, w in enumerate(self.frame_points[j])}
        return self._lookup[j]

    def camera_points(self, j: int, world: np.ndarray | None = None) -> np.ndarray:
        world = self.points if world is None else world
        rot = euler_to_rotation(self.orientations[j])
        return (world - self.positions[j]) @ rot.T

    def relative_pose(self, j1: int, j2: int) -> RelativePose:
        """Camera motion from frame ``j1`` to ``j2`` (translation in ``j1``'s frame)."""
        rot1 = euler_to_rotation(self.orientations[j1])
        return RelativePose(self.orientations[j2] - self.orientations[j1],
                            rot1 @ (self.positions[j2] - self.positions[j1]))

    def correspondence(self, frame_pair: tuple[int, int], source_id: int) -> int | None:
        j1, j2 = frame_pair
        fp = self.frame_points[j1]
        if not 0 <= source_id < len(fp):
            raise KeyError(f"feature {source_id} not in frame {j1}")
        return self._point_to_feature(j2).get(int(fp[source_id]))

    def correspondence_table(self, frame_pair: tuple[int, int]) -> np.ndarray:
        """Target feature id for every source feature id of ``j1``, -1 when absent."""
        key = ("table", *frame_pair)
        if key not in self._lookup:
            j1, j2 = frame_pair
            point_to_feature = np.full(len(self.points), -1, dtype=np.int64)
            point_to_feature[self.frame_points[j2]] = np.arange(len(self.frame_points[j2]))
            self._lookup[key] = point_to_feature[self.frame_points[j1]]
        return self._lookup[key]

    def correspondences(self, frame_pair) -> dict[int, int | None]:
        return {sid: self.correspondence(frame_pair, sid)
                for sid in range(len(self.frame_points[frame_pair[0]]))}


class Scene(NamedTuple):
    frames: list[Frame]
    imu: list[ImuSample]
    truth: GroundTruth


def _project_all(cam: np.ndarray, k: CameraIntrinsics):
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam[:, 0] * k.fx / z + k.cx
        v = cam[:, 1] * k.fy / z + k.cy
    return u, v, z


def _base_descriptors(cfg: SceneConfig, rng: np.random.Generator):
    n, L = cfg.num_points, cfg.descriptor_length
    if cfg.descriptor_kind is DescriptorKind.BINARY:
        base = rng.integers(0, 256, size=(n, L), dtype=np.uint8)
    else:
        base = rng.standard_normal((n, L))
        base /= np.linalg.norm(base, axis=1, keepdims=True)
    if cfg.num_distractors:
        copies = rng.choice(n, size=2 * cfg.num_distractors, replace=False)
        for dst, src in zip(copies[: cfg.num_distractors], copies[cfg.num_distractors:]):
            base[dst] = base[src]
    return base


def _observe(base_rows, cfg: SceneConfig, rng: np.random.Generator) -> list[Descriptor]:
    """Per-frame observations of the given base descriptors."""
    if cfg.descriptor_kind is DescriptorKind.BINARY:
        bits = int(cfg.descriptor_noise)
        rows = base_rows
        if bits:
            nbits = 8 * cfg.descriptor_length
            # `bits` distinct positions per row: the smallest keys of a random permutation
            keys = rng.random((len(base_rows), nbits))
            flip = np.argsort(keys, axis=1)[:, :bits]
            mask = np.zeros((len(base_rows), nbits), dtype=bool)
            np.put_along_axis(mask, flip, True, axis=1)
            rows = base_rows ^ np.packbits(mask, axis=1, bitorder="little")
        return [Descriptor.binary(r.tobytes()) for r in rows]
    rows = base_rows
    if cfg.descriptor_noise:
        rows = base_rows + rng.normal(0.0, cfg.descriptor_noise, base_rows.shape)
    return [Descriptor.real(r) for r in rows.tolist()]


def generate_scene(cfg: SceneConfig) -> Scene:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    k = cfg.intrinsics
    traj = Trajectory(cfg.trajectory, cfg.duration)

    if cfg.volume is None:
        n = cfg.num_points
        u = rng.uniform(0, cfg.width, n)
        v = rng.uniform(0, cfg.height, n)
        z = rng.uniform(*cfg.depth_range, n)
        points = np.column_stack([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z])
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in cfg.volume)
        points = rng.uniform(lo, hi, size=(cfg.num_points, 3))
    base = _base_descriptors(cfg, rng)

    n_frames = int(math.floor(cfg.duration * cfg.frame_rate + 1e-9)) + 1
    timestamps, orientations, positions = [], [], []
    frames, frame_points = [], []
    for j in range(n_frames):
        t = j / cfg.frame_rate
        theta, pos = traj.pose(t)
        cam = (points - pos) @ euler_to_rotation(theta).T
        u, v, z = _project_all(cam, k)
        visible = np.flatnonzero((z > 0) & (u >= 0) & (u < cfg.width) & (v >= 0) & (v < cfg.height))
        visible = visible[rng.permutation(len(visible))]
        descs = _observe(base[visible], cfg, rng)
        feats = [FeaturePoint(fid, uu, vv, zz * k.s, desc) for fid, (uu, vv, zz, desc)
                 in enumerate(zip(u[visible].tolist(), v[visible].tolist(), z[visible].tolist(), descs))]
        frames.append(Frame(t, cfg.width, cfg.height, feats))
        frame_points.append(visible.astype(np.int64))
        timestamps.append(t)
        orientations.append(theta)
        positions.append(pos)

    n_imu = int(round(cfg.duration * cfg.imu_rate))
    gyro_sigma, accel_sigma = cfg.imu_noise_sigma
    imu = []
    for i in range(1, n_imu + 1):
        t0, t1 = (i - 1) / cfg.imu_rate, i / cfg.imu_rate
        omega, accel = traj.imu(0.5 * (t0 + t1))
        if gyro_sigma:
            omega = omega + rng.normal(0.0, gyro_sigma, 3)
        if accel_sigma:
            accel = accel + rng.normal(0.0, accel_sigma, 3)
        imu.append(ImuSample(t1, omega, accel))

    truth = GroundTruth(tuple(timestamps), tuple(orientations), np.array(positions), points,
                        tuple(frame_points), k, cfg.width, cfg.height)
    return Scene(frames, imu, truth)


def true_reprojection(truth: GroundTruth, frame_pair: tuple[int, int], feature_id: int):
    """Exact position in frame ``j2`` of the world point behind ``feature_id`` in ``j1``.

    Returns None when the point is not in view of ``j2``.
    """
    j1, j2 = frame_pair
    fp = truth.frame_points[j1]
    if not 0 <= feature_id < len(fp):
        raise KeyError(f"feature {feature_id} not in frame {j1}")
    cam = truth.camera_points(j2, truth.points[fp[feature_id]][None, :])[0]
    if cam[2] <= 0:
        return None
    k = truth.intrinsics
    u = cam[0] * k.fx / cam[2] + k.cx
    v = cam[1] * k.fy / cam[2] + k.cy
    if not (0 <= u < truth.width and 0 <= v < truth.height):
        return None
    return (float(u), float(v))


def true_reprojections(truth: GroundTruth, frame_pair: tuple[int, int]):
    """``true_reprojection`` for every feature of frame ``j1`` at once.

    Returns ``(u, v, visible)`` arrays indexed by source feature id; entries
    that are not visible hold NaN.
    """
    j1, j2 = frame_pair
    cam = truth.camera_points(j2, truth.points[truth.frame_points[j1]])
    k = truth.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam[:, 0] * k.fx / cam[:, 2] + k.cx
        v = cam[:, 1] * k.fy / cam[:, 2] + k.cy
    visible = (cam[:, 2] > 0) & (u >= 0) & (u < truth.width) & (v >= 0) & (v < truth.height)
    u[~visible] = np.nan
    v[~visible] = np.nan
    return u, v, visible


def score_matches(report: MatchReport, truth: GroundTruth, frame_pair: tuple[int, int]) -> tuple[int, int]:
    """Return ``(total, false)`` where false pairs contradict the true correspondence."""
    pairs = report.pairs
    if not pairs:
        return 0, 0
    table = truth.correspondence_table(frame_pair)
    sids = np.fromiter((p.source_id for p in pairs), dtype=np.int64, count=len(pairs))
    tids = np.fromiter((p.target_id for p in pairs), dtype=np.int64, count=len(pairs))
    if sids.min() < 0 or sids.max() >= len(table):
        raise KeyError(f"match report references features outside frame {frame_pair[0]}")
    return len(pairs), int(np.count_nonzero(table[sids] != tids))


def with_seed(cfg: SceneConfig, seed: int) -> SceneConfig:
    return replace(cfg, seed=seed)
