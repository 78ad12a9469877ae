"""Similarity metrics: intersection-aware local NCC, global NCC, and the
combined weighted registration loss.

The local metric averages per-window normalized cross-correlations over the
joint valid region of the two images, so it stays defined for arbitrary
intersection shapes (rectangular, polygonal, fragmented) down to a small
minimum overlap. Windowed sums are computed with integral images, making one
evaluation O(N) in the pixel count regardless of kernel size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoOverlapError, ZeroVarianceError
from .geometry import geodesic_error, gram_schmidt_6d_to_matrix

DEFAULT_KERNEL = 51
DEFAULT_MIN_OVERLAP = 64
# per-pixel variance below this is treated as zero (window skipped)
_VAR_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Weights of the similarity, translation, and rotation loss terms.

    Must be nonnegative and sum to 1. The default reproduces the 20:1:10
    ratio used for the combined loss.
    """

    alpha: float = 20.0 / 31.0
    beta: float = 1.0 / 31.0
    gamma: float = 10.0 / 31.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be nonnegative")
        total = self.alpha + self.beta + self.gamma
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"loss weights must sum to 1, got {total!r}")

    @classmethod
    def from_ratio(cls, a, b, c):
        total = float(a + b + c)
        return cls(a / total, b / total, c / total)


@dataclass(frozen=True)
class MetricResult:
    """A similarity value plus the size of the joint valid region."""

    value: float
    overlap_count: int
    valid: bool = True


def _box_sums(fields, radius):
    """Window sums of stacked 2D fields over (2r+1)^2 boxes clipped at the
    borders, via one shared integral image. O(N) regardless of radius."""
    k, n0, n1 = fields.shape
    s = np.zeros((k, n0 + 1, n1 + 1), dtype=float)
    np.cumsum(fields, axis=1, out=s[:, 1:, 1:])
    np.cumsum(s[:, 1:, 1:], axis=2, out=s[:, 1:, 1:])

    lo0 = np.maximum(np.arange(n0) - radius, 0)
    hi0 = np.minimum(np.arange(n0) + radius, n0 - 1) + 1
    lo1 = np.maximum(np.arange(n1) - radius, 0)
    hi1 = np.minimum(np.arange(n1) + radius, n1 - 1) + 1
    r0 = lo0[:, None]
    r1 = lo1[None, :]
    c0 = hi0[:, None]
    c1 = hi1[None, :]
    return s[:, c0, c1] - s[:, r0, c1] - s[:, c0, r1] + s[:, r0, r1]


def lncc_masked(a_vals, b_vals, joint_mask, kernel=DEFAULT_KERNEL,
                min_overlap=DEFAULT_MIN_OVERLAP):
    """Array-level local NCC over an explicit joint mask (see :func:`lncc`)."""
    kernel = int(kernel)
    if kernel < 3 or kernel % 2 == 0:
        raise ValueError(f"kernel must be odd and >= 3, got {kernel}")
    m = joint_mask
    overlap = int(m.sum())
    if overlap < min_overlap:
        raise NoOverlapError(overlap, min_overlap)
    radius = kernel // 2

    # centering by the global masked means costs nothing and avoids the
    # catastrophic cancellation integral images suffer on large offsets
    av = np.where(m, a_vals - a_vals[m].mean(), 0.0)
    bv = np.where(m, b_vals - b_vals[m].mean(), 0.0)
    fields = np.stack([m.astype(float), av, bv, av * av, bv * bv, av * bv])
    n, sa, sb, saa, sbb, sab = _box_sums(fields, radius)

    with np.errstate(invalid="ignore", divide="ignore"):
        cov = sab - sa * sb / n
        var_a = np.maximum(saa - sa * sa / n, 0.0)
        var_b = np.maximum(sbb - sb * sb / n, 0.0)
        contributing = m & (n >= 2) & (var_a > _VAR_EPS * n) & (var_b > _VAR_EPS * n)
        ncc = cov / np.sqrt(var_a * var_b)

    count = int(contributing.sum())
    value = float(ncc[contributing].mean()) if count else 0.0
    value = min(1.0, max(-1.0, value))
    return MetricResult(value, overlap)


def _joint_mask(a, b, min_overlap):
    if a.dims != b.dims:
        raise ValueError(f"images must share a raster: {a.dims} vs {b.dims}")
    m = a.mask & b.mask
    overlap = int(m.sum())
    if overlap < min_overlap:
        raise NoOverlapError(overlap, min_overlap)
    return m, overlap


def lncc(a, b, kernel=DEFAULT_KERNEL, min_overlap=DEFAULT_MIN_OVERLAP):
    """Local NCC averaged over the joint valid region of two images.

    Each window is a kernel x kernel box around a joint-valid center,
    restricted to joint-valid pixels; windows with fewer than 2 such pixels
    or with zero variance in either image contribute nothing. The result is
    the mean of the per-window correlations, in [-1, 1]. If every window is
    skipped (both images constant on the overlap) the value is 0.

    Raises NoOverlapError when the joint valid region is smaller than
    ``min_overlap`` pixels.
    """
    if a.dims != b.dims:
        raise ValueError(f"images must share a raster: {a.dims} vs {b.dims}")
    return lncc_masked(a.intensities, b.intensities, a.mask & b.mask,
                       kernel=kernel, min_overlap=min_overlap)


def gncc_masked(a_vals, b_vals, joint_mask, min_overlap=DEFAULT_MIN_OVERLAP):
    """Array-level global NCC over an explicit joint mask (see :func:`gncc`)."""
    m = joint_mask
    overlap = int(m.sum())
    if overlap < min_overlap:
        raise NoOverlapError(overlap, min_overlap)
    av = a_vals[m]
    bv = b_vals[m]
    av = av - av.mean()
    bv = bv - bv.mean()
    var_a = float(np.dot(av, av))
    var_b = float(np.dot(bv, bv))
    if var_a <= _VAR_EPS * overlap or var_b <= _VAR_EPS * overlap:
        raise ZeroVarianceError("a masked image is constant; NCC is undefined")
    value = float(np.dot(av, bv) / math.sqrt(var_a * var_b))
    value = min(1.0, max(-1.0, value))
    return MetricResult(value, overlap)


def gncc(a, b, min_overlap=DEFAULT_MIN_OVERLAP):
    """Single NCC over the joint valid region.

    Raises NoOverlapError below the minimum overlap and ZeroVarianceError
    when either masked image is constant.
    """
    if a.dims != b.dims:
        raise ValueError(f"images must share a raster: {a.dims} vs {b.dims}")
    return gncc_masked(a.intensities, b.intensities, a.mask & b.mask,
                       min_overlap=min_overlap)


def translation_mse(pred, gt):
    """Squared Euclidean distance between two translations, in mm^2."""
    d = np.asarray(pred, dtype=float) - np.asarray(gt, dtype=float)
    return float(np.dot(d, d))


def combined_loss(
    pred_slice,
    ref,
    pred,
    gt,
    weights=LossWeights(),
    kernel=DEFAULT_KERNEL,
    min_overlap=DEFAULT_MIN_OVERLAP,
):
    """Weighted sum of image dissimilarity and supervised pose terms.

    value = alpha * (1 - LNCC) + beta * ||dtrans||_2 + gamma * geodesic,
    with the geodesic angle in radians so the default 10:1 weighting against
    millimeter-scale translations keeps the terms comparable. Zero exactly
    when the slices correlate perfectly and the parameters match.

    A NoOverlap failure of the similarity term is absorbed as the worst
    possible dissimilarity (1 - LNCC = 2) so the loss stays finite and
    strongly penalizes unusable poses.
    """
    try:
        similarity = lncc(pred_slice, ref, kernel=kernel, min_overlap=min_overlap)
        dissim = 1.0 - similarity.value
    except NoOverlapError:
        dissim = 2.0
    dtrans = float(np.linalg.norm(pred.trans - gt.trans))
    geo = geodesic_error(
        gram_schmidt_6d_to_matrix(pred.rot6d),
        gram_schmidt_6d_to_matrix(gt.rot6d),
        degrees=False,
    )
    return weights.alpha * dissim + weights.beta * dtrans + weights.gamma * geo
