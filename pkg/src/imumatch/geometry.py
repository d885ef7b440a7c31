"""Pinhole projection and rotation algebra.

Conventions
-----------
* Camera axes: x right, y down, z along the optical axis.
* Euler angles are ZYX: ``psi`` about z (yaw), ``theta`` about y (pitch),
  ``phi`` about x (roll). The quaternion built from them is
  ``q_z(psi) * q_y(theta) * q_x(phi)``.
* :func:`quaternion_to_rotation` returns the *passive* matrix, i.e. the
  transpose of the usual active rotation ``Rz @ Ry @ Rx``. Applied to point
  coordinates expressed in a camera frame, it yields the coordinates of the
  same point in a camera that has been rotated by those angles.
* Euler differences are never wrapped. Rotations larger than pi between two
  frames are not supported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BehindCameraError, InvalidArgumentError, InvalidDepthError


class EulerAngles(NamedTuple):
    psi: float = 0.0    # about z
    theta: float = 0.0  # about y
    phi: float = 0.0    # about x

    def __sub__(self, other):
        return EulerAngles(self.psi - other.psi, self.theta - other.theta, self.phi - other.phi)

    def __add__(self, other):
        return EulerAngles(self.psi + other.psi, self.theta + other.theta, self.phi + other.phi)


class Quaternion(NamedTuple):
    w: float
    x: float
    y: float
    z: float

    @property
    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def normalized(self) -> "Quaternion":
        n = self.norm
        if not math.isfinite(n) or n < 1e-12:
            raise InvalidArgumentError(f"cannot normalize quaternion with norm {n!r}")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)


class PixelPoint(NamedTuple):
    u: float
    v: float
    d: float


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    s: float = 1.0

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy", "s"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"intrinsic {name} must be finite")
        if self.fx <= 0 or self.fy <= 0 or self.s <= 0:
            raise InvalidArgumentError("fx, fy and s must be positive")


# Kinect / TUM freiburg defaults.
DEFAULT_INTRINSICS = CameraIntrinsics(fx=525.0, fy=525.0, cx=319.5, cy=239.5, s=5000.0)


def _check_finite(values, what):
    for x in values:
        if not math.isfinite(x):
            raise InvalidArgumentError(f"{what} must be finite, got {tuple(values)!r}")


def euler_to_quaternion(angles: EulerAngles) -> Quaternion:
    """Convert ZYX Euler angles to a unit quaternion ``(w, x, y, z)``."""
    psi, theta, phi = angles
    _check_finite((psi, theta, phi), "Euler angles")
    cps, sps = math.cos(psi / 2), math.sin(psi / 2)
    cth, sth = math.cos(theta / 2), math.sin(theta / 2)
    cph, sph = math.cos(phi / 2), math.sin(phi / 2)
    q = Quaternion(
        cph * cth * cps + sph * sth * sps,
        sph * cth * cps - cph * sth * sps,
        cph * sth * cps + sph * cth * sps,
        cph * cth * sps - sph * sth * cps,
    )
    return q.normalized()


def quaternion_to_rotation(q: Quaternion) -> np.ndarray:
    """Passive rotation matrix of a quaternion.

    Quaternions whose norm is off by more than 1e-6 are normalized first.
    """
    q = Quaternion(*q)
    _check_finite(q, "quaternion")
    if abs(q.norm - 1.0) > 1e-6:
        q = q.normalized()
    q0, q1, q2, q3 = q
    return np.array([
        [1 - 2 * q2 * q2 - 2 * q3 * q3, 2 * q1 * q2 + 2 * q0 * q3, 2 * q1 * q3 - 2 * q0 * q2],
        [2 * q1 * q2 - 2 * q0 * q3, 1 - 2 * q1 * q1 - 2 * q3 * q3, 2 * q2 * q3 + 2 * q0 * q1],
        [2 * q1 * q3 + 2 * q0 * q2, 2 * q2 * q3 - 2 * q0 * q1, 1 - 2 * q1 * q1 - 2 * q2 * q2],
    ])


def euler_to_rotation(angles: EulerAngles) -> np.ndarray:
    return quaternion_to_rotation(euler_to_quaternion(angles))


def project(point, k: CameraIntrinsics) -> PixelPoint:
    x, y, z = (float(c) for c in point)
    _check_finite((x, y, z), "point")
    if z <= 0:
        raise BehindCameraError(f"point {(x, y, z)!r} is not in front of the camera")
    return PixelPoint(x * k.fx / z + k.cx, y * k.fy / z + k.cy, z * k.s)


def backproject(p: PixelPoint, k: CameraIntrinsics) -> np.ndarray:
    u, v, d = (float(c) for c in p)
    _check_finite((u, v, d), "pixel")
    if d <= 0:
        raise InvalidDepthError(f"depth {d!r} is not positive")
    z = d / k.s
    return np.array([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z])


def transform_point(p, rot, trans) -> np.ndarray:
    """Return ``rot @ p + trans``."""
    p = np.asarray(p, dtype=float)
    trans = np.asarray(trans, dtype=float)
    rot = np.asarray(rot, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(trans)) and np.all(np.isfinite(rot))):
        raise InvalidArgumentError("transform_point requires finite inputs")
    return rot @ p + trans
