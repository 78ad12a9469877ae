"""Rigid 3D transforms and rotation parameterizations.

Rotations live as 3x3 orthonormal matrices. The optimization-facing
parameterization keeps the first two matrix columns (a continuous "6D"
encoding) and recovers the full matrix by Gram-Schmidt orthonormalization,
so gradient steps in the 9-number (6D rotation + 3D translation) space can
always be reprojected onto a valid rigid transform.

Conventions
-----------
* Translations are millimeters, matching image physical coordinates.
* Euler angles are degrees and compose as ``Rz(rz) @ Ry(ry) @ Rx(rx)``
  (fixed-frame x, then y, then z). This convention is only used to sample
  perturbations and to decompose residual rotations per axis.
* A transform maps a point ``p`` to ``rotation @ p + translation``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

ORTHONORMALITY_TOL = 1e-9
DEGENERACY_TOL = 1e-9


def _as_vec3(v, name="vector"):
    out = np.asarray(v, dtype=float).reshape(-1)
    if out.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {np.shape(v)}")
    return out


def validate_rotation(m, tol=ORTHONORMALITY_TOL):
    """Check that ``m`` is a proper rotation: m.T @ m = I and det(m) = +1.

    Raises ValueError when either invariant is violated beyond ``tol``.
    Returns the matrix as a float64 (3, 3) array.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"rotation matrix must be 3x3, got shape {m.shape}")
    err = np.abs(m.T @ m - np.eye(3)).max()
    if err > tol:
        raise ValueError(f"matrix is not orthonormal: max |m.T m - I| = {err:.3e}")
    det = np.linalg.det(m)
    if abs(det - 1.0) > tol:
        raise ValueError(f"matrix is not a proper rotation: det = {det!r}")
    return m


@dataclass(frozen=True, eq=False)
class Rotation6D:
    """Two 3-vectors: the first and second columns of a rotation matrix.

    Any pair with nonzero ``a1`` and ``a2`` not parallel to the normalized
    ``a1`` maps back to a valid rotation via :func:`gram_schmidt_6d_to_matrix`.
    """

    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a1", _as_vec3(self.a1, "a1"))
        object.__setattr__(self, "a2", _as_vec3(self.a2, "a2"))

    def as_vector(self):
        """Pack as a length-6 array [a1, a2]."""
        return np.concatenate([self.a1, self.a2])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape != (6,):
            raise ValueError(f"6D rotation vector must have 6 entries, got {v.shape}")
        return cls(v[:3], v[3:])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """An SE(3) pose: 3x3 rotation plus translation in mm.

    Maps points as ``p -> rotation @ p + translation``. The rotation is
    validated on construction (orthonormal, det +1, within 1e-9).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = validate_rotation(self.rotation)
        rot.flags.writeable = False
        trans = _as_vec3(self.translation, "translation")
        trans.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t):
        return cls(np.eye(3), t)

    def apply(self, points):
        """Apply to one point (3,) or an array of points (..., 3)."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def to_dict(self):
        """JSON-ready dict: row-major 9-element rotation + translation in mm."""
        return {
            "rotation": [float(x) for x in self.rotation.reshape(-1)],
            "translation_mm": [float(x) for x in self.translation],
        }

    @classmethod
    def from_dict(cls, d):
        rot = np.asarray(d["rotation"], dtype=float).reshape(3, 3)
        return cls(rot, d["translation_mm"])


@dataclass(frozen=True, eq=False)
class TransformParams:
    """The 9-number optimization vector: 6D rotation + 3D translation (mm).

    The canonical form stores the actual first two columns of the rotation
    matrix, so canonicalizing twice yields bit-identical numbers.
    """

    rot6d: Rotation6D
    trans: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "trans", _as_vec3(self.trans, "trans"))

    def to_vector(self):
        """Pack as [tx, ty, tz, a1x, a1y, a1z, a2x, a2y, a2z]."""
        return np.concatenate([self.trans, self.rot6d.as_vector()])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape != (9,):
            raise ValueError(f"parameter vector must have 9 entries, got {v.shape}")
        return cls(Rotation6D.from_vector(v[3:]), v[:3])

    def to_transform(self):
        return RigidTransform(gram_schmidt_6d_to_matrix(self.rot6d), self.trans)

    @classmethod
    def from_transform(cls, t):
        return cls(matrix_to_6d(t.rotation), t.translation)

    def canonical(self):
        """Reproject onto the image of ``matrix_to_6d`` (idempotent)."""
        return TransformParams.from_transform(self.to_transform())


@dataclass(frozen=True)
class EulerAnglesXYZ:
    """Fixed-frame Euler angles in degrees, composed as Rz @ Ry @ Rx."""

    rx: float
    ry: float
    rz: float


def matrix_to_6d(r):
    """Drop the last column of a rotation matrix, keeping columns 1 and 2."""
    r = validate_rotation(r)
    return Rotation6D(r[:, 0].copy(), r[:, 1].copy())


def gram_schmidt_6d_to_matrix(p):
    """Map a 6D rotation representation back to a 3x3 rotation matrix.

    b1 = N(a1); b2 = N(a2 - (b1 . a2) b1); b3 = b1 x b2, with N the vector
    normalization. Columns of the result are (b1, b2, b3).

    Raises DegenerateInputError when a1 is (near-)zero or a2 is
    (near-)parallel to b1 (residual norm below 1e-9).
    """
    n1 = np.linalg.norm(p.a1)
    if n1 < DEGENERACY_TOL:
        raise DegenerateInputError(f"a1 norm {n1:.3e} is too small to normalize")
    b1 = p.a1 / n1
    resid = p.a2 - np.dot(b1, p.a2) * b1
    n2 = np.linalg.norm(resid)
    if n2 < DEGENERACY_TOL:
        raise DegenerateInputError(
            f"a2 is parallel to normalized a1 (residual norm {n2:.3e})"
        )
    b2 = resid / n2
    b3 = np.cross(b1, b2)
    return np.column_stack([b1, b2, b3])


def geodesic_error(a, b, degrees=True):
    """Minimal rotation angle separating two rotation matrices.

    Computes arccos((trace(a @ b^-1) - 1) / 2) with the trace argument
    clamped to [-1, 1] to absorb floating-point drift. Symmetric in (a, b);
    the result lies in [0, 180] degrees (or [0, pi] radians).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rel = a @ b.T
    c = (np.trace(rel) - 1.0) / 2.0
    angle = math.acos(min(1.0, max(-1.0, c)))
    return math.degrees(angle) if degrees else angle


def compose(outer, inner):
    """Composition: the result applied to p equals outer(inner(p))."""
    rot = outer.rotation @ inner.rotation
    trans = outer.rotation @ inner.translation + outer.translation
    return RigidTransform(rot, trans)


def _axis_rotation(axis, angle_deg):
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    if axis == 0:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == 1:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(e):
    """Rotation matrix Rz(rz) @ Ry(ry) @ Rx(rx) from fixed-frame degrees."""
    if not isinstance(e, EulerAnglesXYZ):
        e = EulerAnglesXYZ(*e)
    return (
        _axis_rotation(2, e.rz) @ _axis_rotation(1, e.ry) @ _axis_rotation(0, e.rx)
    )


def matrix_to_euler(r):
    """Inverse of :func:`euler_to_matrix` away from the ry = +/-90 deg lock.

    For R = Rz @ Ry @ Rx: ry = asin(-R[2,0]), rx = atan2(R[2,1], R[2,2]),
    rz = atan2(R[1,0], R[0,0]). At gimbal lock rx is set to 0 and rz absorbs
    the remaining in-plane angle.
    """
    r = np.asarray(r, dtype=float)
    sy = -r[2, 0]
    sy = min(1.0, max(-1.0, sy))
    ry = math.asin(sy)
    if abs(sy) < 1.0 - 1e-12:
        rx = math.atan2(r[2, 1], r[2, 2])
        rz = math.atan2(r[1, 0], r[0, 0])
    else:
        rx = 0.0
        rz = math.atan2(-r[0, 1], r[1, 1])
    return EulerAnglesXYZ(math.degrees(rx), math.degrees(ry), math.degrees(rz))
