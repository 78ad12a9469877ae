"""Synthetic volumes with vessel-like tubes, lesions, speckle, and named
landmarks, plus scripted motion sequences.

Phantoms are the ground-truth oracle for every desk-scale experiment: the
pose a slice was extracted at is known exactly, landmark positions are
declared analytically, and scripted motion gives per-frame truth for the
temporal workflow. Rendering is deterministic given the spec's seed.

The volume frame is centered: physical (0, 0, 0) is the volume center, so
structure geometry is specified in mm around the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GeometryOutOfBoundsError, NoOverlapError
from .geometry import RigidTransform, compose
from .imaging import Image2D, Volume3D, slice_geometry
from .resampler import extract_slice, make_slice_grid


@dataclass(frozen=True)
class Tube:
    """A vessel-like tube: polyline centerline (mm), radius (mm), intensity."""

    points: tuple
    radius: float
    intensity: float = 0.9

    def __post_init__(self):
        pts = tuple(tuple(float(x) for x in p) for p in self.points)
        if len(pts) < 2:
            raise ValueError("tube polyline needs at least 2 points")
        if self.radius <= 0:
            raise ValueError(f"tube radius must be positive, got {self.radius}")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class Ellipsoid:
    center: tuple
    semi_axes: tuple
    intensity: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))
        object.__setattr__(self, "semi_axes", tuple(float(x) for x in self.semi_axes))
        if min(self.semi_axes) <= 0:
            raise ValueError("ellipsoid semi-axes must be positive")


@dataclass(frozen=True)
class Speckle:
    """Correlated Gaussian texture: seeded, zero-mean, unit-SD before scaling."""

    seed: int = 0
    amplitude: float = 0.0
    correlation_mm: float = 1.5


@dataclass(frozen=True)
class PhantomSpec:
    """Volume geometry plus texture settings.

    ``texture`` is a smooth large-scale random field (think soft tissue
    contrast variations): it fills otherwise-empty regions with structure
    whose correlation length allows similarity metrics to pull from far
    away. ``speckle`` is the fine-grained noise layer. Both are seeded and
    zero-mean; structures are alpha-composited over background + texture.
    """

    dims: tuple = (96, 96, 80)
    spacing: float = 1.0
    tubes: tuple = ()
    ellipsoids: tuple = ()
    speckle: Speckle = field(default_factory=Speckle)
    texture: Speckle = field(default_factory=Speckle)
    landmarks: dict = field(default_factory=dict)
    mask_shape: str = "full"
    background: float = 0.0
    edge_voxels: float = 1.0

    def __post_init__(self):
        if self.mask_shape not in ("full", "sector"):
            raise ValueError(f"mask_shape must be 'full' or 'sector', got {self.mask_shape!r}")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    def extent_mm(self):
        """Physical half-extent per axis (center-origin convention)."""
        return (np.array(self.dims, dtype=float) - 1.0) / 2.0 * self.spacing

    def to_dict(self):
        return {
            "dims": list(self.dims),
            "spacing_mm": self.spacing,
            "tubes": [
                {"points": [list(p) for p in t.points], "radius_mm": t.radius,
                 "intensity": t.intensity}
                for t in self.tubes
            ],
            "ellipsoids": [
                {"center": list(e.center), "semi_axes": list(e.semi_axes),
                 "intensity": e.intensity}
                for e in self.ellipsoids
            ],
            "speckle": _speckle_dict(self.speckle),
            "texture": _speckle_dict(self.texture),
            "landmarks": {k: list(v) for k, v in self.landmarks.items()},
            "mask_shape": self.mask_shape,
            "background": self.background,
            "edge_voxels": self.edge_voxels,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"dims", "spacing_mm", "tubes", "ellipsoids", "speckle",
                 "texture", "landmarks", "mask_shape", "background",
                 "edge_voxels"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown phantom spec keys: {sorted(unknown)}")
        return cls(
            dims=tuple(d.get("dims", (96, 96, 80))),
            spacing=float(d.get("spacing_mm", 1.0)),
            tubes=tuple(
                Tube(t["points"], t["radius_mm"], t.get("intensity", 0.9))
                for t in d.get("tubes", [])
            ),
            ellipsoids=tuple(
                Ellipsoid(e["center"], e["semi_axes"], e.get("intensity", 0.7))
                for e in d.get("ellipsoids", [])
            ),
            speckle=_speckle_from_dict(d.get("speckle", {}), "speckle"),
            texture=_speckle_from_dict(d.get("texture", {}), "texture"),
            landmarks={k: tuple(float(x) for x in v)
                       for k, v in d.get("landmarks", {}).items()},
            mask_shape=d.get("mask_shape", "full"),
            background=float(d.get("background", 0.0)),
            edge_voxels=float(d.get("edge_voxels", 1.0)),
        )


@dataclass(frozen=True)
class MotionScript:
    """Per-frame rigid motion of the phantom content."""

    transforms: tuple

    def __len__(self):
        return len(self.transforms)

    @classmethod
    def static(cls, n_frames):
        return cls(tuple(RigidTransform.identity() for _ in range(n_frames)))

    @classmethod
    def sinusoid_translation(cls, amplitude_mm, period_frames, n_frames,
                             axis=(1.0, 0.0, 0.0)):
        """Respiratory-style sinusoidal drift along ``axis``."""
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        transforms = []
        for i in range(n_frames):
            d = amplitude_mm * np.sin(2.0 * np.pi * i / period_frames)
            transforms.append(RigidTransform.from_translation(d * axis))
        return cls(tuple(transforms))


def _speckle_dict(s):
    return {"seed": s.seed, "amplitude": s.amplitude,
            "correlation_mm": s.correlation_mm}


def _speckle_from_dict(d, where):
    unknown = set(d) - {"seed", "amplitude", "correlation_mm"}
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")
    return Speckle(int(d.get("seed", 0)), float(d.get("amplitude", 0.0)),
                   float(d.get("correlation_mm", 1.5)))


def _quintic_step(t):
    """C2 smoothstep: 0 at t<=0, 1 at t>=1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _correlated_field(dims, spacing, speckle):
    """Seeded zero-mean Gaussian field, unit SD, given correlation length."""
    rng = np.random.default_rng(speckle.seed)
    noise = rng.standard_normal(dims)
    sigma = speckle.correlation_mm / spacing
    if sigma > 0:
        noise = ndimage.gaussian_filter(noise, sigma)
    sd = noise.std()
    if sd > 0:
        noise /= sd
    return noise


def _segment_distance(pts, p0, p1):
    """Distance from points (..., 3) to the segment p0-p1."""
    v = p1 - p0
    denom = float(np.dot(v, v))
    rel = pts - p0
    if denom == 0.0:
        return np.linalg.norm(rel, axis=-1)
    s = np.clip(rel @ v / denom, 0.0, 1.0)
    closest = p0 + s[..., None] * v
    return np.linalg.norm(pts - closest, axis=-1)


def _check_inside(spec, point, margin, what):
    ext = spec.extent_mm()
    p = np.asarray(point, dtype=float)
    if np.any(np.abs(p) + margin > ext + 1e-9):
        raise GeometryOutOfBoundsError(
            f"{what} at {tuple(p)} (margin {margin} mm) exceeds extent {tuple(ext)}"
        )


def _sector_mask(spec, pts):
    """A fan-shaped valid region: apex on the -y face, opening along +y."""
    ext = spec.extent_mm()
    apex = np.array([0.0, -ext[1], 0.0])
    rel = pts - apex
    depth = np.linalg.norm(rel, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_angle = np.where(depth > 0, rel[..., 1] / np.maximum(depth, 1e-12), 1.0)
    half_angle = np.deg2rad(42.0)
    return (cos_angle >= np.cos(half_angle)) & (depth <= 1.9 * ext[1])


def render(spec):
    """Render a phantom spec into a masked volume plus its landmarks.

    The base field is background + texture; each structure is then
    alpha-composited with a quintic boundary profile of ``edge_voxels``
    total width, so intensities stay in range without flat clipped regions
    and similarity gradients remain well-behaved. Speckle is added last,
    inside the mask; the result is clipped to [0, 1]. Deterministic for a
    fixed spec.
    """
    for tube in spec.tubes:
        for p in tube.points:
            _check_inside(spec, p, tube.radius, "tube point")
    for ell in spec.ellipsoids:
        _check_inside(spec, ell.center, max(ell.semi_axes), "ellipsoid")
    for name, p in spec.landmarks.items():
        _check_inside(spec, p, 0.0, f"landmark {name!r}")

    nx, ny, nz = spec.dims
    origin = -spec.extent_mm()
    xs = origin[0] + spec.spacing * np.arange(nx)
    ys = origin[1] + spec.spacing * np.arange(ny)
    zs = origin[2] + spec.spacing * np.arange(nz)
    pts = np.empty((nx, ny, nz, 3), dtype=float)
    pts[..., 0] = xs[:, None, None]
    pts[..., 1] = ys[None, :, None]
    pts[..., 2] = zs[None, None, :]

    edge = spec.edge_voxels * spec.spacing
    half = edge / 2.0
    inten = np.full(spec.dims, float(spec.background))
    if spec.texture.amplitude > 0:
        inten += spec.texture.amplitude * _correlated_field(
            spec.dims, spec.spacing, spec.texture
        )

    def blend(profile, value):
        # alpha-composite: interior reaches the structure intensity exactly
        nonlocal inten
        inten = inten * (1.0 - profile) + value * profile

    for tube in spec.tubes:
        verts = [np.asarray(p, dtype=float) for p in tube.points]
        profile = np.zeros(spec.dims)
        for p0, p1 in zip(verts[:-1], verts[1:]):
            d = _segment_distance(pts, p0, p1)
            np.maximum(profile, _quintic_step((tube.radius + half - d) / edge),
                       out=profile)
        blend(profile, tube.intensity)
    for ell in spec.ellipsoids:
        center = np.asarray(ell.center, dtype=float)
        axes = np.asarray(ell.semi_axes, dtype=float)
        # normalized radial coordinate; edge width mapped through the
        # smallest semi-axis so the falloff is at most edge mm wide
        rho = np.linalg.norm((pts - center) / axes, axis=-1)
        scale = axes.min()
        profile = _quintic_step(((1.0 + half / scale) - rho) * scale / edge)
        blend(profile, ell.intensity)

    if spec.mask_shape == "sector":
        mask = _sector_mask(spec, pts)
    else:
        mask = np.ones(spec.dims, dtype=bool)

    if spec.speckle.amplitude > 0:
        inten = inten + spec.speckle.amplitude * _correlated_field(
            spec.dims, spec.spacing, spec.speckle
        )

    inten = np.clip(inten, 0.0, 1.0)
    inten[~mask] = 0.0
    volume = Volume3D(inten, spec.spacing, origin, mask)
    landmarks = {k: np.asarray(v, dtype=float) for k, v in spec.landmarks.items()}
    return volume, landmarks


def default_phantom_spec(dims=(96, 96, 80), spacing=1.0, speckle_amplitude=0.08,
                         speckle_seed=0, texture_amplitude=0.2, texture_seed=7,
                         mask_shape="full"):
    """A structured vessel-tree phantom with two named bifurcations.

    The layout scales with the requested extent so the same structure works
    at any desk-scale resolution: a bright trunk with two branches and a
    sub-branch, two soft lesions, a smooth tissue-like texture field with
    ~1/9-extent correlation length, and optional fine speckle.
    """
    ext = (np.array(dims, dtype=float) - 1.0) / 2.0 * spacing

    def at(fx, fy, fz):
        return (fx * ext[0], fy * ext[1], fz * ext[2])

    j_main = at(0.0, 0.0, 0.05)
    j_upper = at(0.26, 0.21, 0.33)
    tubes = (
        Tube((at(0.0, -0.62, -0.72), j_main), radius=0.085 * ext.min()),
        Tube((j_main, at(0.52, 0.42, 0.62)), radius=0.065 * ext.min(), intensity=0.85),
        Tube((j_main, at(-0.46, 0.31, 0.68)), radius=0.065 * ext.min(), intensity=0.85),
        Tube((j_upper, at(0.66, -0.12, 0.48)), radius=0.045 * ext.min(), intensity=0.8),
    )
    ellipsoids = (
        Ellipsoid(at(0.32, -0.32, 0.12),
                  (0.14 * ext[0], 0.11 * ext[1], 0.1 * ext[2]), intensity=0.7),
        Ellipsoid(at(-0.38, -0.22, -0.3),
                  (0.1 * ext[0], 0.15 * ext[1], 0.12 * ext[2]), intensity=0.6),
    )
    landmarks = {"bifurcation_main": j_main, "bifurcation_upper": j_upper}
    return PhantomSpec(
        dims=tuple(dims),
        spacing=spacing,
        tubes=tubes,
        ellipsoids=ellipsoids,
        speckle=Speckle(speckle_seed, speckle_amplitude, correlation_mm=2.0 * spacing),
        texture=Speckle(texture_seed, texture_amplitude,
                        correlation_mm=float(ext.min()) / 4.5),
        landmarks=landmarks,
        mask_shape=mask_shape,
        background=0.4,
    )


def make_pair(volume, pose, noise=0.0, slice_dims=None, slice_spacing=None,
              seed=0, min_overlap=64):
    """Extract a 2D slice at a known pose, optionally with seeded noise.

    Returns (image, ground_truth_pose). The slice raster is a centered z=0
    plane transformed by ``pose``; noise is white Gaussian of the given
    amplitude added inside the mask. Raises NoOverlapError when the pose
    yields fewer than ``min_overlap`` valid pixels.
    """
    if slice_dims is None:
        slice_dims = volume.dims[:2]
    if slice_spacing is None:
        slice_spacing = volume.spacing
    geom = slice_geometry(slice_dims, slice_spacing)
    grid = make_slice_grid(geom, pose, volume)
    image = extract_slice(volume, grid)
    overlap = int(image.mask.sum())
    if overlap < min_overlap:
        raise NoOverlapError(overlap, min_overlap)
    if noise > 0:
        rng = np.random.default_rng(seed)
        noisy = image.intensities + np.where(
            image.mask, noise * rng.standard_normal(image.dims), 0.0
        )
        image = Image2D(np.clip(noisy, 0.0, 1.0), image.spacing, image.origin,
                        image.axes, image.mask)
    return image, pose


def animate(volume, script, tracked_error=None, probe_pose=None, noise=0.0,
            seed=0, slice_dims=None, slice_spacing=None):
    """Slice a moving phantom into a frame sequence with tracked poses.

    Frame i images the phantom after it moved by ``script.transforms[i]``;
    with a probe fixed at ``probe_pose`` the effective slice-to-volume pose
    is motion^-1 o probe. The reported tracked pose deliberately omits the
    scripted motion (the tracker cannot see internal motion); passing the
    script itself as ``tracked_error`` models perfect tracking instead.

    Returns (frames, true_poses): the workflow inputs and the exact
    slice-to-volume pose per frame (the oracle).
    """
    from .workflow import FrameInput

    if probe_pose is None:
        probe_pose = RigidTransform.identity()
    frames = []
    true_poses = []
    for i, motion in enumerate(script.transforms):
        true_pose = compose(motion.inverse(), probe_pose)
        image, _ = make_pair(volume, true_pose, noise=noise, seed=seed + i,
                             slice_dims=slice_dims, slice_spacing=slice_spacing)
        if tracked_error is None:
            tracked = probe_pose
        else:
            tracked = compose(tracked_error[i].inverse(), probe_pose)
        frames.append(FrameInput(timestamp=float(i), image=image, tracked=tracked))
        true_poses.append(true_pose)
    return frames, true_poses
