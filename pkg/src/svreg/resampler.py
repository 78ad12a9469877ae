"""Sampling-grid construction and trilinear slice extraction.

The registration metric compares a reference 2D image against a slice
resampled from the 3D volume: a canonical slice raster G_0 (physical mm
points) is mapped through the candidate rigid transform into the volume
frame, and intensities are interpolated there. Points landing outside the
volume extent are flagged invalid, get intensity 0 and a false mask, so the
similarity metric sees the honest overlap region.

Grid coordinates are physical millimeters (not normalized), which keeps
translations directly interpretable against reported pose errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import Image2D, Volume3D

# intensity contribution of interpolated mask below which a sample is invalid
MASK_THRESHOLD = 0.5
_BOUNDS_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Physical sample coordinates (..., 3) plus in-bounds validity flags.

    ``raster`` optionally carries the Image2D geometry of the G_0 lattice the
    coordinates were generated from, so extraction can reuse it for output.
    """

    coords: np.ndarray
    validity: np.ndarray
    raster: Image2D = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        validity = np.asarray(self.validity, dtype=bool)
        if coords.shape[:-1] != validity.shape or coords.shape[-1] != 3:
            raise ValueError(
                f"coords shape {coords.shape} does not match validity {validity.shape}"
            )
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "validity", validity)


def trilinear_weights(frac):
    """The 8 corner weights for fractional offsets (..., 3).

    Corner order is binary over (x, y, z): 000, 001, 010, 011, 100, 101,
    110, 111. For any input the weights sum to exactly 1 up to float
    rounding (partition of unity).
    """
    frac = np.asarray(frac, dtype=float)
    fx, fy, fz = frac[..., 0], frac[..., 1], frac[..., 2]
    wx = np.stack([1.0 - fx, fx], axis=-1)
    wy = np.stack([1.0 - fy, fy], axis=-1)
    wz = np.stack([1.0 - fz, fz], axis=-1)
    w = (
        wx[..., :, None, None]
        * wy[..., None, :, None]
        * wz[..., None, None, :]
    )
    return w.reshape(frac.shape[:-1] + (8,))


def grid_validity(volume, coords):
    """True where a physical point lies inside the volume's extent."""
    idx = volume.physical_to_index(coords)
    upper = np.array(volume.dims, dtype=float) - 1.0
    return np.all((idx >= -_BOUNDS_EPS) & (idx <= upper + _BOUNDS_EPS), axis=-1)


def _interp_trilinear(values, idx):
    """Trilinear interpolation of ``values`` at fractional indices (..., 3).

    Indices are assumed in-bounds; they are clipped to the last valid cell
    so exact-boundary samples are handled without branching. Corner lookups
    go through one flattened gather per corner to keep the hot path cheap.
    """
    values = np.asarray(values)
    nx, ny, nz = values.shape
    base = np.floor(idx).astype(np.intp)
    np.clip(base[..., 0], 0, nx - 2, out=base[..., 0])
    np.clip(base[..., 1], 0, ny - 2, out=base[..., 1])
    np.clip(base[..., 2], 0, nz - 2, out=base[..., 2])
    frac = idx - base

    flat = values.reshape(-1)
    lin = (base[..., 0] * ny + base[..., 1]) * nz + base[..., 2]
    fx, fy, fz = frac[..., 0], frac[..., 1], frac[..., 2]
    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz

    out = gx * (
        gy * (gz * flat.take(lin) + fz * flat.take(lin + 1))
        + fy * (gz * flat.take(lin + nz) + fz * flat.take(lin + nz + 1))
    )
    step = ny * nz
    out += fx * (
        gy * (gz * flat.take(lin + step) + fz * flat.take(lin + step + 1))
        + fy * (gz * flat.take(lin + step + nz) + fz * flat.take(lin + step + nz + 1))
    )
    return out


def make_slice_grid(slice_spec, t, volume=None):
    """Transform the slice raster G_0 by ``t`` into the volume frame.

    ``slice_spec`` provides the raster geometry (dims, spacing, origin,
    in-plane axes). When ``volume`` is given, validity is computed against
    its physical extent; otherwise all samples are marked valid and
    :func:`extract_slice` settles validity itself.
    """
    coords = t.apply(slice_spec.pixel_points())
    if volume is None:
        validity = np.ones(coords.shape[:-1], dtype=bool)
    else:
        validity = grid_validity(volume, coords)
    return SamplingGrid(coords, validity, raster=slice_spec)


def extract_slice(volume, grid):
    """Interpolate the volume on a sampling grid, producing an Image2D.

    Valid samples are trilinear-interpolated; invalid ones get intensity 0
    and mask false. The output mask additionally requires the interpolated
    volume mask (treated as a {0,1} field) to reach 0.5, so samples straddling
    the volume's own invalid region are rejected.

    The output raster geometry comes from the grid's G_0 lattice; grids built
    without one get a centered z=0 raster at the volume's spacing.
    """
    valid = grid.validity & grid_validity(volume, grid.coords)
    idx = volume.physical_to_index(grid.coords)

    inten = np.zeros(valid.shape, dtype=float)
    mask = np.zeros(valid.shape, dtype=bool)
    if valid.any():
        idx_v = idx[valid]
        sampled = _interp_trilinear(volume.intensities, idx_v)
        mask_field = _interp_trilinear(volume.mask.astype(float), idx_v)
        keep = mask_field >= MASK_THRESHOLD
        inten[valid] = np.where(keep, sampled, 0.0)
        mask[valid] = keep

    spec = grid.raster
    if spec is None:
        return Image2D.centered(inten, volume.spacing, mask=mask)
    return Image2D(inten, spec.spacing, spec.origin, spec.axes, mask)


def transform_volume(volume, t):
    """Resample the volume on its own lattice mapped through ``t``.

    Output voxel i holds the input interpolated at ``t(p_i)``; voxels whose
    mapped point leaves the extent (or the input's valid region) are zeroed
    and masked out.
    """
    nx, ny, nz = volume.dims
    ix = np.arange(nx, dtype=float)[:, None, None]
    iy = np.arange(ny, dtype=float)[None, :, None]
    iz = np.arange(nz, dtype=float)[None, None, :]
    pts = np.empty((nx, ny, nz, 3), dtype=float)
    pts[..., 0] = volume.origin[0] + volume.spacing * ix
    pts[..., 1] = volume.origin[1] + volume.spacing * iy
    pts[..., 2] = volume.origin[2] + volume.spacing * iz

    coords = t.apply(pts)
    valid = grid_validity(volume, coords)
    idx = volume.physical_to_index(coords)

    inten = np.zeros(volume.dims, dtype=float)
    mask = np.zeros(volume.dims, dtype=bool)
    if valid.any():
        idx_v = idx[valid]
        sampled = _interp_trilinear(volume.intensities, idx_v)
        mask_field = _interp_trilinear(volume.mask.astype(float), idx_v)
        keep = mask_field >= MASK_THRESHOLD
        inten[valid] = np.where(keep, sampled, 0.0)
        mask[valid] = keep
    return Volume3D(inten, volume.spacing, volume.origin, mask)
