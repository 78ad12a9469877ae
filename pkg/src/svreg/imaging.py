"""Volume and slice containers plus the preprocessing pipeline.

Images carry an isotropic spacing (mm), a physical origin, and a boolean
validity mask marking the genuine imaging region. The preprocessing steps
are isotropic resampling, center crop / zero-pad to fixed dims, and min-max
intensity scaling over the mask. All operations return new objects and
never place nonzero intensity at a mask-false location.

Index convention: arrays are indexed ``[ix, iy]`` / ``[ix, iy, iz]`` with
``dims = (nx, ny)`` / ``(nx, ny, nz)``. A voxel's physical position is
``origin + spacing * index`` for volumes (volume axes are the frame axes)
and ``origin + spacing * (ix * axes[0] + iy * axes[1])`` for slices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import ConstantImageWarning, EmptyImageError


def _check_raster(intensities, mask):
    intensities = np.asarray(intensities, dtype=float)
    if mask is None:
        mask = np.ones(intensities.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
    if mask.shape != intensities.shape:
        raise ValueError(
            f"mask shape {mask.shape} != intensity shape {intensities.shape}"
        )
    return intensities, mask


@dataclass(frozen=True, eq=False)
class Volume3D:
    """A 3D intensity grid with isotropic spacing, origin, and validity mask."""

    intensities: np.ndarray
    spacing: float
    origin: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        inten, mask = _check_raster(self.intensities, self.mask)
        if inten.ndim != 3:
            raise ValueError(f"volume intensities must be 3D, got {inten.ndim}D")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        for a in (inten, mask, origin):
            a.flags.writeable = False
        object.__setattr__(self, "intensities", inten)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", origin)

    @property
    def dims(self):
        return self.intensities.shape

    @classmethod
    def centered(cls, intensities, spacing, mask=None):
        """Construct with the volume center at physical (0, 0, 0)."""
        intensities = np.asarray(intensities, dtype=float)
        dims = np.array(intensities.shape, dtype=float)
        origin = -(dims - 1.0) / 2.0 * spacing
        return cls(intensities, spacing, origin, mask)

    def index_to_physical(self, idx):
        """Physical mm position of (fractional) voxel indices (..., 3)."""
        return self.origin + np.asarray(idx, dtype=float) * self.spacing

    def physical_to_index(self, pts):
        return (np.asarray(pts, dtype=float) - self.origin) / self.spacing


@dataclass(frozen=True, eq=False)
class Image2D:
    """A 2D intensity raster embedded in 3D physical space.

    ``axes`` holds two orthonormal in-plane unit vectors (rows); pixel
    (ix, iy) sits at ``origin + spacing * (ix * axes[0] + iy * axes[1])``.
    """

    intensities: np.ndarray
    spacing: float
    origin: np.ndarray
    axes: np.ndarray = None
    mask: np.ndarray = None

    def __post_init__(self):
        inten, mask = _check_raster(self.intensities, self.mask)
        if inten.ndim != 2:
            raise ValueError(f"image intensities must be 2D, got {inten.ndim}D")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        axes = self.axes
        if axes is None:
            axes = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        axes = np.asarray(axes, dtype=float).reshape(2, 3)
        gram = axes @ axes.T
        if np.abs(gram - np.eye(2)).max() > 1e-9:
            raise ValueError("in-plane axes must be orthonormal within 1e-9")
        for a in (inten, mask, origin, axes):
            a.flags.writeable = False
        object.__setattr__(self, "intensities", inten)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axes", axes)

    @property
    def dims(self):
        return self.intensities.shape

    @classmethod
    def centered(cls, intensities, spacing, mask=None, axes=None):
        """Construct a raster in the z=0 plane centered on physical (0, 0, 0)."""
        intensities = np.asarray(intensities, dtype=float)
        if axes is None:
            axes = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        axes = np.asarray(axes, dtype=float).reshape(2, 3)
        nx, ny = intensities.shape
        origin = -spacing * ((nx - 1) / 2.0 * axes[0] + (ny - 1) / 2.0 * axes[1])
        return cls(intensities, spacing, origin, axes, mask)

    def pixel_points(self):
        """Physical mm coordinates of every pixel center, shape (nx, ny, 3)."""
        nx, ny = self.dims
        ix = np.arange(nx, dtype=float)[:, None, None]
        iy = np.arange(ny, dtype=float)[None, :, None]
        return self.origin + self.spacing * (ix * self.axes[0] + iy * self.axes[1])


def slice_geometry(dims, spacing):
    """An empty centered Image2D raster in the z=0 plane; used as G_0."""
    return Image2D.centered(np.zeros(dims), spacing)


def _zero_outside_mask(intensities, mask):
    out = np.array(intensities, dtype=float)
    out[~mask] = 0.0
    return out


def resample_isotropic(img, target_spacing):
    """Resample to a new isotropic spacing, preserving the physical extent.

    Intensities are interpolated with trilinear (bilinear in 2D) weights;
    the mask is resampled nearest-neighbor and then eroded by one voxel so
    partially-valid border samples never leak into similarity windows.
    When the spacing is already the target, the input is returned unchanged.
    """
    if target_spacing <= 0:
        raise ValueError(f"target spacing must be positive, got {target_spacing}")
    if any(n < 2 for n in img.dims):
        raise EmptyImageError(f"cannot resample image with dims {img.dims}")
    if target_spacing == img.spacing:
        return img

    old = img.spacing
    new_dims = tuple(
        int(round((n - 1) * old / target_spacing)) + 1 for n in img.dims
    )
    # index of each new sample on the old lattice
    grids = [
        np.arange(n, dtype=float) * target_spacing / old for n in new_dims
    ]
    mesh = np.meshgrid(*grids, indexing="ij")
    coords = np.stack(mesh, axis=0)

    inten = ndimage.map_coordinates(
        np.asarray(img.intensities), coords, order=1, mode="nearest"
    )
    mask_nn = ndimage.map_coordinates(
        img.mask.astype(np.uint8), coords, order=0, mode="constant", cval=0
    ).astype(bool)
    mask = ndimage.binary_erosion(mask_nn)
    inten = _zero_outside_mask(inten, mask)

    if isinstance(img, Volume3D):
        return Volume3D(inten, target_spacing, img.origin, mask)
    return Image2D(inten, target_spacing, img.origin, img.axes, mask)


def _crop_pad_axis(n_src, n_tgt):
    """Source start (crop) and destination start (pad) for one axis."""
    if n_tgt <= n_src:
        return (n_src - n_tgt) // 2, 0
    return 0, (n_tgt - n_src) // 2


def center_crop_pad(img, target_dims):
    """Crop or zero-pad symmetrically to ``target_dims``.

    Padded voxels get intensity 0 and mask false. The origin is updated so
    retained voxels keep their physical coordinates.
    """
    target_dims = tuple(int(n) for n in target_dims)
    if len(target_dims) != len(img.dims):
        raise ValueError(
            f"target dims {target_dims} rank does not match image dims {img.dims}"
        )
    if any(n < 1 for n in target_dims):
        raise ValueError(f"target dims must be >= 1, got {target_dims}")
    if target_dims == img.dims:
        return img

    inten = np.zeros(target_dims, dtype=float)
    mask = np.zeros(target_dims, dtype=bool)
    src_slices, dst_slices, offsets = [], [], []
    for n_src, n_tgt in zip(img.dims, target_dims):
        src0, dst0 = _crop_pad_axis(n_src, n_tgt)
        count = min(n_src, n_tgt)
        src_slices.append(slice(src0, src0 + count))
        dst_slices.append(slice(dst0, dst0 + count))
        offsets.append(src0 - dst0)
    inten[tuple(dst_slices)] = img.intensities[tuple(src_slices)]
    mask[tuple(dst_slices)] = img.mask[tuple(src_slices)]

    if isinstance(img, Volume3D):
        origin = img.origin + img.spacing * np.asarray(offsets, dtype=float)
        return Volume3D(inten, img.spacing, origin, mask)
    origin = img.origin + img.spacing * (
        offsets[0] * img.axes[0] + offsets[1] * img.axes[1]
    )
    return Image2D(inten, img.spacing, origin, img.axes, mask)


def normalize_intensity(img):
    """Min-max scale masked intensities to [0, 1]; outside-mask stays 0.

    A constant masked image cannot be scaled; it maps to 0.5 everywhere
    inside the mask and a ConstantImageWarning is emitted.
    """
    if not img.mask.any():
        raise ValueError("mask contains no valid voxels")
    vals = img.intensities[img.mask]
    lo, hi = vals.min(), vals.max()
    if hi == lo:
        warnings.warn(
            "constant masked image; using the 0.5 fallback", ConstantImageWarning
        )
        inten = np.where(img.mask, 0.5, 0.0)
    else:
        inten = _zero_outside_mask((img.intensities - lo) / (hi - lo), img.mask)
    return replace(img, intensities=inten)


def preprocess(img, target_spacing, target_dims):
    """Resample -> center crop/pad -> normalize, as one deterministic step."""
    out = resample_isotropic(img, target_spacing)
    out = center_crop_pad(out, target_dims)
    return normalize_intensity(out)
