"""Predict where current-frame features land in the next frame."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from .features import FeaturePoint, Frame
from .geometry import CameraIntrinsics, euler_to_rotation
from .imu_state import RelativePose, StateLog, relative_pose


class PredictionStatus(str, enum.Enum):
    OK = "ok"
    INVALID_DEPTH = "invalid_depth"
    BEHIND_CAMERA = "behind_camera"
    OUT_OF_FRAME = "out_of_frame"


class Prediction(NamedTuple):
    feature_id: int
    u: float
    v: float
    status: PredictionStatus

    @property
    def predicted(self) -> tuple[float, float]:
        return (self.u, self.v)

    @property
    def usable(self) -> bool:
        """True when the matcher can search a window around this prediction."""
        return self.status is PredictionStatus.OK or self.status is PredictionStatus.OUT_OF_FRAME


def _is_identity(pose: RelativePose) -> bool:
    return tuple(pose.rotation) == (0.0, 0.0, 0.0) and not np.any(pose.translation)


def _transform_lists(pose: RelativePose):
    if _is_identity(pose):
        return None, None
    rot, trans = point_transform(pose)
    return rot.tolist(), trans.tolist()


def point_transform(pose: RelativePose) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and translation mapping earlier-camera points into the later camera.

    ``pose.translation`` is the camera displacement, so a static point moves
    by ``-R @ translation`` in addition to the rotation.
    """
    rot = euler_to_rotation(pose.rotation)
    return rot, -(rot @ pose.translation)


def _predict(p: FeaturePoint, rot, trans, k: CameraIntrinsics, width, height) -> Prediction:
    if not p.d > 0:
        return Prediction(p.id, math.nan, math.nan, PredictionStatus.INVALID_DEPTH)
    if rot is None:
        # no motion: skip the round trip so boundary pixels keep their exact coordinates
        u, v = p.u, p.v
    else:
        u, v = _reproject(p, rot, trans, k)
        if u is None:
            return Prediction(p.id, math.nan, math.nan, PredictionStatus.BEHIND_CAMERA)
    status = PredictionStatus.OK
    if width is not None and not (0 <= u < width and 0 <= v < height):
        status = PredictionStatus.OUT_OF_FRAME
    return Prediction(p.id, u, v, status)


def _reproject(p: FeaturePoint, rot, trans, k: CameraIntrinsics):
    z1 = p.d / k.s
    x1 = (p.u - k.cx) * z1 / k.fx
    y1 = (p.v - k.cy) * z1 / k.fy
    # rot @ P1 + trans, unrolled: this runs once per feature
    x = rot[0][0] * x1 + rot[0][1] * y1 + rot[0][2] * z1 + trans[0]
    y = rot[1][0] * x1 + rot[1][1] * y1 + rot[1][2] * z1 + trans[1]
    z = rot[2][0] * x1 + rot[2][1] * y1 + rot[2][2] * z1 + trans[2]
    if not z > 0:
        return None, None
    return x * k.fx / z + k.cx, y * k.fy / z + k.cy


def predict_feature(p: FeaturePoint, pose: RelativePose, k: CameraIntrinsics,
                    width: float | None = None, height: float | None = None) -> Prediction:
    """Back-project ``p``, move it by ``pose`` and re-project.

    Failures are reported through ``Prediction.status``; nothing is raised for
    bad depth or points that end up behind the camera.
    """
    rot, trans = _transform_lists(pose)
    return _predict(p, rot, trans, k, width, height)


def predict_frame(current: Frame, log: StateLog, next_timestamp: float, k: CameraIntrinsics,
                  threads: int = 1) -> list[Prediction]:
    """One prediction per feature of ``current``, in feature order.

    The relative pose is looked up once for the frame pair.
    """
    pose = relative_pose(log, current.timestamp, next_timestamp)
    return predict_with_pose(current, pose, k, threads=threads)


def predict_with_pose(current: Frame, pose: RelativePose, k: CameraIntrinsics,
                      threads: int = 1) -> list[Prediction]:
    """Vectorized ``predict_feature`` over every feature of ``current``.

    Work is elementwise, so splitting the features across ``threads`` gives
    the same result as a single pass.
    """
    feats = current.features
    n = len(feats)
    if n == 0:
        return []
    _, us, vs, ds, _ = zip(*((f.id, f.u, f.v, f.d, None) for f in feats))
    uvd = np.array([us, vs, ds], dtype=np.float64)
    if _is_identity(pose):
        rot = trans = None
    else:
        rot, trans = point_transform(pose)
    if threads <= 1 or n < 2 * threads:
        u, v, code = _reproject_many(uvd, rot, trans, k, current.width, current.height)
    else:
        chunks = np.array_split(np.arange(n), threads)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda c: _reproject_many(uvd[:, c], rot, trans, k, current.width,
                                                          current.height), chunks))
        u, v, code = (np.concatenate([p[i] for p in parts]) for i in range(3))
    statuses = [_STATUS_BY_CODE[c] for c in code.tolist()]
    return [Prediction(f.id, pu, pv, st) for f, pu, pv, st in zip(feats, u.tolist(), v.tolist(), statuses)]


_STATUS_BY_CODE = (PredictionStatus.OK, PredictionStatus.INVALID_DEPTH, PredictionStatus.BEHIND_CAMERA,
                   PredictionStatus.OUT_OF_FRAME)


def _reproject_many(uvd: np.ndarray, rot, trans, k: CameraIntrinsics, width, height):
    """Array form of ``_predict``; returns ``(u, v, status_code)``."""
    u1, v1, d = uvd
    valid = d > 0
    code = np.where(valid, 0, 1)
    if rot is None:
        u, v = u1.copy(), v1.copy()
    else:
        z1 = d / k.s
        x1 = (u1 - k.cx) * z1 / k.fx
        y1 = (v1 - k.cy) * z1 / k.fy
        x = rot[0, 0] * x1 + rot[0, 1] * y1 + rot[0, 2] * z1 + trans[0]
        y = rot[1, 0] * x1 + rot[1, 1] * y1 + rot[1, 2] * z1 + trans[1]
        z = rot[2, 0] * x1 + rot[2, 1] * y1 + rot[2, 2] * z1 + trans[2]
        behind = valid & ~(z > 0)
        code[behind] = 2
        with np.errstate(divide="ignore", invalid="ignore"):
            u = x * k.fx / z + k.cx
            v = y * k.fy / z + k.cy
    bad = code != 0
    u[bad] = np.nan
    v[bad] = np.nan
    if width is not None:
        outside = ~bad & ~((u >= 0) & (u < width) & (v >= 0) & (v < height))
        code[outside] = 3
    return u, v, code
