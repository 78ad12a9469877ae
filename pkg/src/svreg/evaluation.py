"""Pose-error decomposition, TRE, samplers, and summary statistics.

Pose errors are measured on the relative transform estimate o truth^-1:
its translation components, their Euclidean norm, the per-axis Euler
decomposition of its rotation (fixed-frame Rz Ry Rx convention), and the
geodesic angle. This makes the error right-invariant: composing both poses
with a common transform changes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoPairsError
from .geometry import (
    EulerAnglesXYZ,
    RigidTransform,
    compose,
    euler_to_matrix,
    geodesic_error,
    matrix_to_euler,
)


@dataclass(frozen=True)
class PoseError:
    """Decomposed translational (mm) and rotational (degrees) error."""

    tx: float
    ty: float
    tz: float
    euclidean: float
    rx: float
    ry: float
    rz: float
    geodesic: float


@dataclass(frozen=True)
class Landmark:
    """A named physical point, in the volume frame or on a slice."""

    id: str
    position: tuple
    frame: str = "volume"

    def __post_init__(self):
        pos = tuple(float(x) for x in self.position)
        if not all(math.isfinite(x) for x in pos):
            raise ValueError(f"landmark {self.id!r} has non-finite position")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class PerturbationSpec:
    """Gaussian candidate noise: per-axis sigmas and the candidate count."""

    translation_sigma: tuple = (1.0, 1.0, 1.0)
    rotation_sigma: tuple = (1.5, 1.5, 1.5)
    count: int = 100

    def __post_init__(self):
        object.__setattr__(self, "translation_sigma",
                           tuple(float(s) for s in self.translation_sigma))
        object.__setattr__(self, "rotation_sigma",
                           tuple(float(s) for s in self.rotation_sigma))
        if min(self.translation_sigma) < 0 or min(self.rotation_sigma) < 0:
            raise ValueError("sigmas must be nonnegative")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class AugmentationSpec:
    """Uniform perturbation half-widths: (x, y, z) in mm and degrees."""

    t_range: tuple = (10.0, 10.0, 5.0)
    r_range: tuple = (5.0, 5.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "t_range", tuple(float(s) for s in self.t_range))
        object.__setattr__(self, "r_range", tuple(float(s) for s in self.r_range))
        if min(self.t_range) < 0 or min(self.r_range) < 0:
            raise ValueError("half-widths must be nonnegative")


def pose_error(estimate, truth):
    """Error record for the relative transform estimate o truth^-1."""
    delta = compose(estimate, truth.inverse())
    tx, ty, tz = delta.translation
    euler = matrix_to_euler(delta.rotation)
    return PoseError(
        tx=float(tx),
        ty=float(ty),
        tz=float(tz),
        euclidean=float(np.linalg.norm(delta.translation)),
        rx=euler.rx,
        ry=euler.ry,
        rz=euler.rz,
        geodesic=geodesic_error(delta.rotation, np.eye(3)),
    )


def apply_perturbation(base, d_trans, d_rot_deg):
    """Perturb pose parameters: rotation left-multiplied by the Euler
    perturbation, translation offset added."""
    rot = euler_to_matrix(EulerAnglesXYZ(*d_rot_deg)) @ base.rotation
    return RigidTransform(rot, base.translation + np.asarray(d_trans, dtype=float))


def sample_augmentation(spec, seed, base=None):
    """One uniform pose perturbation from the augmentation ranges.

    Translations are uniform in +/- t_range per axis, Euler angles uniform
    in +/- r_range; seeded and reproducible. When ``base`` is given the
    perturbation is applied to it, otherwise the perturbation transform
    itself is returned.
    """
    rng = np.random.default_rng(seed)
    d_trans = rng.uniform(-1.0, 1.0, size=3) * np.asarray(spec.t_range)
    d_rot = rng.uniform(-1.0, 1.0, size=3) * np.asarray(spec.r_range)
    if base is None:
        base = RigidTransform.identity()
    return apply_perturbation(base, d_trans, d_rot)


def generate_candidates(base, spec, seed):
    """Gaussian-perturbed pose candidates around ``base``.

    Candidate 0 is always the unperturbed base, so downstream selection can
    never do worse than the input; the remaining count-1 candidates add
    N(0, sigma) noise to translations (mm) and Euler angles (degrees).
    """
    rng = np.random.default_rng(seed)
    candidates = [base]
    for _ in range(spec.count - 1):
        d_trans = rng.normal(0.0, 1.0, size=3) * np.asarray(spec.translation_sigma)
        d_rot = rng.normal(0.0, 1.0, size=3) * np.asarray(spec.rotation_sigma)
        candidates.append(apply_perturbation(base, d_trans, d_rot))
    return candidates


def tre(landmarks, estimate):
    """Target registration error over landmark pairs matched by id.

    ``landmarks`` mixes volume-frame and slice-frame entries; pairs share an
    id across the two frames. Slice-frame landmarks are mapped into the
    volume frame by ``estimate`` and compared against their volume-frame
    partners (a rigid map preserves distances, so the direction of
    comparison does not matter). Returns (mean, sd, per-pair distances);
    the SD uses the n-1 denominator and is 0 for a single pair.
    """
    by_id = {lm.id: lm for lm in landmarks if lm.frame == "volume"}
    slice_lms = [lm for lm in landmarks if lm.frame != "volume"]
    pairs = [(by_id[lm.id], lm) for lm in slice_lms if lm.id in by_id]
    if not pairs:
        raise NoPairsError("no landmark pairs share an id")
    dists = []
    for vol_lm, slc_lm in pairs:
        mapped = estimate.apply(np.asarray(slc_lm.position))
        dists.append(float(np.linalg.norm(mapped - np.asarray(vol_lm.position))))
    dists = np.asarray(dists)
    mean = float(dists.mean())
    sd = float(dists.std(ddof=1)) if len(dists) > 1 else 0.0
    return mean, sd, dists


def empirical_cdf(errors):
    """Step-function CDF of an error sample: sorted (threshold, fraction).

    The fraction at the largest threshold is 1. Raises ValueError on an
    empty list.
    """
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        raise ValueError("cannot build a CDF from an empty error list")
    thresholds = np.sort(errors)
    fractions = np.arange(1, errors.size + 1, dtype=float) / errors.size
    return list(zip(thresholds.tolist(), fractions.tolist()))


def cdf_fraction_below(errors, threshold):
    """Fraction of errors strictly below ``threshold``."""
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        raise ValueError("cannot evaluate a CDF on an empty error list")
    return float((errors < threshold).sum() / errors.size)


def mean_sd(values):
    """Sample mean and SD (n-1 denominator; SD 0 for a single value)."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("empty value list")
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd
