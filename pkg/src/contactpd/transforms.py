"""Rigid configurations, the two PD metrics, interpolation and embedding.

A configuration is the pose of the movable body A relative to the fixed
body B: a translation plus a unit quaternion (w, x, y, z), canonicalized
to w >= 0 so each rotation has one representative. Translational-mode
configurations always carry the identity rotation.

The 6-D embedding (translation; sigma * rotation-vector) gives the vector
space used for kd-tree indexing and the projection step of queries, with
sigma = sqrt(trace(second_moment) / volume). Euclidean distance there
matches the object norm to second order near coincident rotations; exact
metric values are always recomputed where it matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MassProperties

TRANSLATIONAL = "translational"
GENERALIZED = "generalized"
MODES = (TRANSLATIONAL, GENERALIZED)

EUCLIDEAN_TRANSLATION = "euclidean_translation"
OBJECT_NORM = "object_norm"
METRICS = (EUCLIDEAN_TRANSLATION, OBJECT_NORM)

_IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])
_IDENTITY_QUAT.setflags(write=False)
_IDENTITY_MAT = np.eye(3)
_IDENTITY_MAT.setflags(write=False)
_UNIT_TOL = 1e-9


def default_metric(mode: str) -> str:
    return EUCLIDEAN_TRANSLATION if mode == TRANSLATIONAL else OBJECT_NORM


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z)


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    if abs(n - 1.0) > 1e-12:
        q = q / n
    else:
        q = q.copy()
    if q[0] < 0.0 or (q[0] == 0.0 and _first_nonzero_negative(q[1:])):
        q = -q
    return q


def _first_nonzero_negative(v) -> bool:
    for x in v:
        if x != 0.0:
            return x < 0.0
    return False


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, p):
    w, x, y, z = q
    px, py, pz = p
    # q * (0, p) * conj(q), expanded
    tx = 2.0 * (y * pz - z * py)
    ty = 2.0 * (z * px - x * pz)
    tz = 2.0 * (x * py - y * px)
    return np.array([
        px + w * tx + (y * tz - z * ty),
        py + w * ty + (z * tx - x * tz),
        pz + w * tz + (x * ty - y * tx),
    ])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m):
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("zero rotation axis")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) / n * axis
    return quat_normalize(q)


def quat_log(q):
    """Rotation vector (axis * angle) of a canonicalized unit quaternion."""
    w = min(max(q[0], -1.0), 1.0)
    v = q[1:]
    n = np.linalg.norm(v)
    if n < 1e-12:
        return 2.0 * v / max(w, 1e-300)
    angle = 2.0 * np.arctan2(n, w)
    return (angle / n) * v


def quat_exp(rotvec):
    rotvec = np.asarray(rotvec, dtype=np.float64)
    angle = np.linalg.norm(rotvec)
    q = np.empty(4)
    if angle < 1e-12:
        q[0] = 1.0
        q[1:] = 0.5 * rotvec
    else:
        q[0] = np.cos(0.5 * angle)
        q[1:] = np.sin(0.5 * angle) / angle * rotvec
    return quat_normalize(q)


def quat_slerp(qa, qb, s):
    """Shortest-arc slerp; the antipodal tie (relative angle pi) picks the
    relative axis whose dominant component points toward +x, then +y, +z,
    in the start frame."""
    qa = np.asarray(qa, dtype=np.float64)
    qb = np.asarray(qb, dtype=np.float64)
    dot = float(qa @ qb)
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot < 1e-12:
        # relative rotation angle is pi; fix the axis sign deterministically
        rel = quat_multiply(quat_conjugate(qa), qb)
        axis = rel[1:].copy()
        if _first_nonzero_negative(axis):
            axis = -axis
        step = quat_from_axis_angle(axis, s * np.pi)
        return quat_normalize(quat_multiply(qa, step))
    if dot > 0.9995:
        out = qa + s * (qb - qa)
        return quat_normalize(out)
    theta = np.arccos(min(dot, 1.0))
    st = np.sin(theta)
    wa = np.sin((1.0 - s) * theta) / st
    wb = np.sin(s * theta) / st
    return quat_normalize(wa * qa + wb * qb)


def random_quat(rng) -> np.ndarray:
    """Uniform random rotation (Shoemake's subgroup method)."""
    u1, u2, u3 = rng.random(3)
    a = np.sqrt(1.0 - u1)
    b = np.sqrt(u1)
    return quat_normalize(np.array([
        a * np.sin(2 * np.pi * u2),
        a * np.cos(2 * np.pi * u2),
        b * np.sin(2 * np.pi * u3),
        b * np.cos(2 * np.pi * u3),
    ]))


# ---------------------------------------------------------------------------
# configurations


class Configuration:
    """Rigid pose of the movable body, with a mode tag.

    Immutable; ``rotation`` is a canonicalized unit quaternion and equals
    the identity in translational mode.
    """

    __slots__ = ("translation", "rotation", "mode", "_matrix")

    def __init__(self, translation, rotation=None, mode=TRANSLATIONAL):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        t = np.asarray(translation, dtype=np.float64).reshape(3).copy()
        if rotation is None:
            q = _IDENTITY_QUAT
        else:
            q = np.asarray(rotation, dtype=np.float64).reshape(4)
            if abs(np.linalg.norm(q) - 1.0) > 1e-6:
                raise ValueError("rotation quaternion is far from unit")
            q = quat_normalize(q)
            q.setflags(write=False)
        if mode == TRANSLATIONAL and abs(q[0] - 1.0) > _UNIT_TOL:
            raise ValueError("translational configurations carry the "
                             "identity rotation")
        t.setflags(write=False)
        self.translation = t
        self.rotation = q
        self.mode = mode
        self._matrix = None

    @classmethod
    def identity(cls, mode=TRANSLATIONAL) -> "Configuration":
        return cls(np.zeros(3), None, mode)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            if self.rotation[0] == 1.0:
                self._matrix = _IDENTITY_MAT
            else:
                m = quat_to_matrix(self.rotation)
                m.setflags(write=False)
                self._matrix = m
        return self._matrix

    def __repr__(self) -> str:
        t = self.translation
        q = self.rotation
        return (f"Configuration(t=({t[0]:.6g}, {t[1]:.6g}, {t[2]:.6g}), "
                f"q=({q[0]:.6g}, {q[1]:.6g}, {q[2]:.6g}, {q[3]:.6g}), "
                f"mode={self.mode})")

    def to_row(self) -> np.ndarray:
        """Serialize as (tx, ty, tz, qw, qx, qy, qz)."""
        return np.concatenate([self.translation, self.rotation])

    @classmethod
    def from_row(cls, row, mode) -> "Configuration":
        row = np.asarray(row, dtype=np.float64).reshape(7)
        return cls(row[:3], row[3:], mode)


def apply(q: Configuration, p) -> np.ndarray:
    """World position of body point p under configuration q."""
    return q.matrix @ np.asarray(p, dtype=np.float64) + q.translation


def apply_to_vertices(q: Configuration, verts: np.ndarray) -> np.ndarray:
    return verts @ q.matrix.T + q.translation


# ---------------------------------------------------------------------------
# metrics


def sigma_scale(props: MassProperties) -> float:
    """Rotation scale of the embedding: RMS point distance from the
    origin, sqrt(trace(second_moment) / volume)."""
    return float(np.sqrt(np.trace(props.second_moment) / props.volume))


def dist(qa: Configuration, qb: Configuration, metric: str,
         props: MassProperties | None = None) -> float:
    """Configuration distance under the requested metric.

    The object norm is the volume-averaged RMS displacement of body
    points, evaluated in closed form from the mass properties:
    d^2 = trace(dR M dR^T)/V + 2 dt . (dR c) + |dt|^2 with dR = Ra - Rb.
    """
    if qa.mode != qb.mode:
        raise ValueError("configurations have different modes")
    dt = qa.translation - qb.translation
    if metric == EUCLIDEAN_TRANSLATION:
        return float(np.linalg.norm(dt))
    if metric != OBJECT_NORM:
        raise ValueError(f"unknown metric {metric!r}")
    if props is None:
        raise ValueError("object norm requires mass properties of A")
    dr = qa.matrix - qb.matrix
    val = (np.trace(dr @ props.second_moment @ dr.T) / props.volume
           + 2.0 * dt @ (dr @ props.centroid)
           + dt @ dt)
    return float(np.sqrt(max(val, 0.0)))


def interpolate(q0: Configuration, q1: Configuration,
                s: float) -> Configuration:
    """Straight-line motion: lerp translation, shortest-arc slerp
    rotation. Exact at the endpoints."""
    if q0.mode != q1.mode:
        raise ValueError("configurations have different modes")
    if s == 0.0:
        return q0
    if s == 1.0:
        return q1
    t = (1.0 - s) * q0.translation + s * q1.translation
    if q0.mode == TRANSLATIONAL:
        return Configuration(t, None, q0.mode)
    q = quat_slerp(q0.rotation, q1.rotation, s)
    return Configuration(t, q, q0.mode)


# ---------------------------------------------------------------------------
# embedding


def embed(q: Configuration, props: MassProperties) -> np.ndarray:
    """6-vector (translation; sigma * rotation-vector) of a
    configuration."""
    out = np.empty(6)
    out[:3] = q.translation
    out[3:] = sigma_scale(props) * quat_log(q.rotation)
    return out


def embed_with_sigma(q: Configuration, sigma: float) -> np.ndarray:
    out = np.empty(6)
    out[:3] = q.translation
    out[3:] = sigma * quat_log(q.rotation)
    return out


def unembed(coords, props: MassProperties, mode: str) -> Configuration:
    coords = np.asarray(coords, dtype=np.float64).reshape(6)
    if mode == TRANSLATIONAL:
        return Configuration(coords[:3], None, mode)
    rotvec = coords[3:] / sigma_scale(props)
    return Configuration(coords[:3], quat_exp(rotvec), mode)
