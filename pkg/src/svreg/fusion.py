"""Dot-product feature fusion for imbalanced 2D/3D feature grids.

A 2D-indexed grid and a 1D-indexed grid are combined into a rank-1 "volume"
of pairwise products: f_merged(i, j, k) = f3d(i, j) * f2d(k). Hand-crafted
block features (mean intensity, mean gradient magnitude) stand in for
learned encoders, which are out of scope here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """Feature values over a 1-3 dimensional index grid.

    ``values`` has the spatial shape plus a trailing channel axis. When a
    grid participates in fusion, its channels are folded into the last
    spatial index in row-major order (see :meth:`folded`).
    """

    values: np.ndarray
    channels: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim < 1 or values.ndim > 4:
            raise ValueError(f"feature values must be 1-4 dimensional, got {values.ndim}")
        if values.size == 0:
            raise EmptyInputError("feature grid is empty")
        if not np.isfinite(values).all():
            raise ValueError("feature grid contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", int(self.channels))

    @property
    def shape(self):
        return self.values.shape

    def folded(self, rank):
        """Values reshaped to ``rank`` indices, channels folded into the last."""
        v = self.values
        if v.ndim == rank:
            return v
        lead = v.shape[: rank - 1]
        return v.reshape(lead + (-1,))


def outer_fuse(f3d, f2d):
    """Elementwise product over the outer index product of two grids.

    ``f3d`` is read with two indices (i, j) and ``f2d`` with one index (k);
    the output grid holds f3d(i, j) * f2d(k) at (i, j, k). Multi-channel
    inputs have their channels folded row-major into the enumerated index.
    The result is bilinear in both inputs and rank-1 along each axis pair.
    """
    a = f3d.folded(2)
    b = f2d.folded(1)
    if a.ndim != 2:
        raise ValueError(f"f3d must fold to 2 indices, has shape {f3d.shape}")
    if b.ndim != 1:
        b = b.reshape(-1)
    merged = a[:, :, None] * b[None, None, :]
    return FeatureGrid(merged, channels=1)


def handcrafted_features(img, pool=4):
    """Block-pooled [mean intensity, mean gradient magnitude] features.

    The image is tiled into ``pool``-sized blocks (truncated at the far
    edge); each block contributes its masked mean intensity and masked mean
    gradient magnitude (per mm, central differences). Blocks with no valid
    pixels produce zeros. Deterministic.
    """
    pool = int(pool)
    if pool < 1:
        raise ValueError(f"pool must be >= 1, got {pool}")
    inten = np.asarray(img.intensities, dtype=float)
    mask = img.mask
    grads = np.gradient(inten, img.spacing)
    gmag = np.sqrt(np.sum([g * g for g in grads], axis=0))

    blocks = tuple(n // pool for n in inten.shape)
    if any(b == 0 for b in blocks):
        raise ValueError(f"pool {pool} larger than image dims {inten.shape}")

    def pooled_mean(field):
        crop = field[tuple(slice(0, b * pool) for b in blocks)]
        mcrop = mask[tuple(slice(0, b * pool) for b in blocks)].astype(float)
        split = sum(((b, pool) for b in blocks), ())
        reduce_axes = tuple(range(1, 2 * len(blocks), 2))
        counts = mcrop.reshape(split).sum(axis=reduce_axes)
        sums = (crop * mcrop).reshape(split).sum(axis=reduce_axes)
        with np.errstate(invalid="ignore"):
            return np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)

    feats = np.stack([pooled_mean(inten), pooled_mean(gmag)], axis=-1)
    return FeatureGrid(feats, channels=2)
