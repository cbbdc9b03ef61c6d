"""Rigid-body transforms on SE(3).

Quaternions are stored in ``(x, y, z, w)`` order, the same order used by TUM
trajectory files. Six-vectors are always ordered ``[rot; trans]``.

Update convention
-----------------
``retract(T, d)`` rotates about the sensor position with world-aligned axes::

    R' = Exp(d_rot) R
    t' = t + d_trans

so the derivative of a point-to-plane residual ``(R p + t - q) . n`` is the
row ``[(R p) x n ; n]``. ``local_coordinates`` is the exact inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SMALL_ANGLE = 1e-8


def hat(v) -> np.ndarray:
    """Skew-symmetric matrix with ``hat(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_exp(phi) -> np.ndarray:
    """Rodrigues formula, axis-angle vector to rotation matrix."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    K = hat(phi)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + K + 0.5 * K @ K
    return (
        np.eye(3)
        + (np.sin(theta) / theta) * K
        + ((1.0 - np.cos(theta)) / theta**2) * K @ K
    )


def so3_log(R) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (goes through the quaternion)."""
    return quat_log(quat_from_matrix(R))


def so3_left_jacobian_inv(phi) -> np.ndarray:
    """Inverse left Jacobian of SO(3): ``Log(Exp(d) Exp(phi)) ~ phi + Jl^-1(phi) d``."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    K = hat(phi)
    if theta < 1e-5:
        return np.eye(3) - 0.5 * K + (1.0 / 12.0) * K @ K
    coef = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) - 0.5 * K + coef * K @ K


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"cannot normalize quaternion {q!r}")
    return q / n


def quat_to_matrix(q) -> np.ndarray:
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(R) -> np.ndarray:
    """Shepperd's method; returns a unit quaternion with ``w >= 0``."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s, 0.25 * s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array(
            [0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s, (R[2, 1] - R[1, 2]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array(
            [(R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s, (R[0, 2] - R[2, 0]) / s]
        )
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array(
            [(R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s, (R[1, 0] - R[0, 1]) / s]
        )
    q = quat_normalize(q)
    return -q if q[3] < 0 else q


def quat_from_rotvec(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    if theta < _SMALL_ANGLE:
        xyz = 0.5 * phi
        return quat_normalize(np.append(xyz, 1.0 - theta**2 / 8.0))
    return np.append(np.sin(theta / 2.0) * phi / theta, np.cos(theta / 2.0))


def quat_log(q) -> np.ndarray:
    """Rotation vector of a unit quaternion, taking the shorter arc."""
    q = quat_normalize(q)
    if q[3] < 0:
        q = -q
    v = q[:3]
    s = float(np.linalg.norm(v))
    if s < _SMALL_ANGLE:
        return 2.0 * v / q[3]
    theta = 2.0 * np.arctan2(s, q[3])
    return theta * v / s


def quat_multiply(a, b) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Increment on the pose manifold: rotation (rad) and translation (m)."""

    rot: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        rot = _frozen(self.rot).reshape(3)
        trans = _frozen(self.trans).reshape(3)
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(trans))):
            raise ValueError("tangent vector entries must be finite")
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "trans", trans)

    @classmethod
    def from_array(cls, v) -> "TangentVector":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3], v[3:])

    @classmethod
    def zero(cls) -> "TangentVector":
        return cls(np.zeros(3), np.zeros(3))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.rot, self.trans])

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def _as_delta(delta) -> np.ndarray:
    if isinstance(delta, TangentVector):
        return delta.as_array()
    return np.asarray(delta, dtype=float).reshape(6)


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform mapping points from its child frame into its parent frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    _R: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = quat_normalize(np.asarray(self.rotation, dtype=float).reshape(4))
        t = _frozen(self.translation).reshape(3)
        object.__setattr__(self, "rotation", _frozen(q))
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "_R", _frozen(quat_to_matrix(q)))

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls()

    @classmethod
    def from_matrix(cls, T) -> "PoseSE3":
        T = np.asarray(T, dtype=float)
        return cls(quat_from_matrix(T[:3, :3]), T[:3, 3])

    @classmethod
    def from_rt(cls, R, t) -> "PoseSE3":
        return cls(quat_from_matrix(R), t)

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        return cls(quat_from_rotvec(rotvec), translation)

    @classmethod
    def from_xyz_rpy(cls, x=0.0, y=0.0, z=0.0, roll=0.0, pitch=0.0, yaw=0.0) -> "PoseSE3":
        """Build from fixed-axis roll/pitch/yaw (radians), ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
        R = so3_exp([0, 0, yaw]) @ so3_exp([0, pitch, 0]) @ so3_exp([roll, 0, 0])
        return cls.from_rt(R, [x, y, z])

    @property
    def R(self) -> np.ndarray:
        return self._R

    @property
    def t(self) -> np.ndarray:
        return self.translation

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self._R
        T[:3, 3] = self.translation
        return T

    def rpy(self) -> np.ndarray:
        """Roll, pitch, yaw (radians) matching :meth:`from_xyz_rpy`."""
        R = self._R
        pitch = np.arcsin(np.clip(-R[2, 0], -1.0, 1.0))
        roll = np.arctan2(R[2, 1], R[2, 2])
        yaw = np.arctan2(R[1, 0], R[0, 0])
        return np.array([roll, pitch, yaw])

    def __matmul__(self, other: "PoseSE3") -> "PoseSE3":
        return compose(self, other)

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.6g}" for v in self.translation)
        q = ", ".join(f"{v:.6g}" for v in self.rotation)
        return f"PoseSE3(t=[{t}], q_xyzw=[{q}])"


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Transform that applies ``b`` first, then ``a``."""
    q = quat_multiply(a.rotation, b.rotation)
    return PoseSE3(q, a.R @ b.translation + a.translation)


def inverse(a: PoseSE3) -> PoseSE3:
    qx, qy, qz, qw = a.rotation
    return PoseSE3(np.array([-qx, -qy, -qz, qw]), -(a.R.T @ a.translation))


def apply(a: PoseSE3, p) -> np.ndarray:
    """``R p + t`` for a single point or an ``(N, 3)`` array."""
    p = np.asarray(p, dtype=float)
    return p @ a.R.T + a.translation


def retract(a: PoseSE3, delta) -> PoseSE3:
    d = _as_delta(delta)
    q = quat_multiply(quat_from_rotvec(d[:3]), a.rotation)
    return PoseSE3(q, a.translation + d[3:])


def local_coordinates(a: PoseSE3, b: PoseSE3) -> np.ndarray:
    """Inverse of :func:`retract`: the 6-vector ``d`` with ``retract(a, d) == b``."""
    qa = a.rotation
    q_rel = quat_multiply(b.rotation, np.array([-qa[0], -qa[1], -qa[2], qa[3]]))
    return np.concatenate([quat_log(q_rel), b.translation - a.translation])


def ominus(a: PoseSE3, b: PoseSE3) -> np.ndarray:
    """Error of ``a`` relative to ``b`` as ``[Log(Rb^T Ra); Rb^T (ta - tb)]``."""
    qb = b.rotation
    q_rel = quat_multiply(np.array([-qb[0], -qb[1], -qb[2], qb[3]]), a.rotation)
    return np.concatenate([quat_log(q_rel), b.R.T @ (a.translation - b.translation)])


def rotation_angle(a: PoseSE3) -> float:
    """Rotation magnitude in radians."""
    return float(np.linalg.norm(quat_log(a.rotation)))
