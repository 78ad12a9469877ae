"""Iterative intensity-driven pose refinement.

The optimizer walks the 9-number parameter space (6D rotation + 3D
translation) downhill on ``1 - similarity``, using central finite-difference
gradients and reprojecting the rotation through Gram-Schmidt after every
step, so iterates always remain valid rigid transforms. The step schedule
decays geometrically and additionally backs off when a step fails to
improve the loss, ITK-regular-step style; the best pose seen along the
trajectory is what gets returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LostOverlapError,
    NoOverlapError,
    NonFiniteError,
    ZeroVarianceError,
)
from .geometry import RigidTransform, TransformParams
from .metrics import DEFAULT_KERNEL, DEFAULT_MIN_OVERLAP, gncc_masked, lncc_masked
from .resampler import _interp_trilinear

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max_iters"
STATUS_LOST_OVERLAP = "lost_overlap"

# loss assigned to poses whose similarity cannot be evaluated (no overlap)
NO_OVERLAP_LOSS = 2.0
# backoff recovery factor after an accepted step
_BACKOFF_GROW = 1.25
_BACKOFF_SHRINK = 0.5


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`refine`.

    ``metric`` selects the similarity ("lncc" with ``kernel``, or "gncc").
    Steps are the per-iteration movement along the normalized gradient
    (mm for translation, unitless for the 6D rotation coordinates);
    ``fd_step_*`` are the central-difference probe sizes. Steps decay by
    ``decay`` every ``patience`` iterations and back off adaptively on
    rejected moves; the search stops once both effective steps fall below
    the ``min_step_*`` floors, or when a ``patience`` window improves the
    best loss by less than ``tol``. With ``grad_subsample`` < 1 only a
    seeded random subset of coordinates is probed per iteration (the
    stochastic variant).
    """

    metric: str = "lncc"
    kernel: int = DEFAULT_KERNEL
    max_iters: int = 200
    step_trans: float = 0.5
    step_rot: float = 0.01
    fd_step_trans: float = 0.25
    fd_step_rot: float = 0.005
    decay: float = 0.8
    patience: int = 80
    tol: float = 1e-6
    seed: int = 0
    min_overlap: int = DEFAULT_MIN_OVERLAP
    grad_subsample: float = 1.0
    min_step_trans: float = 1e-3
    min_step_rot: float = 2e-5

    def __post_init__(self):
        if self.metric not in ("lncc", "gncc"):
            raise ValueError(f"metric must be 'lncc' or 'gncc', got {self.metric!r}")
        for name in ("step_trans", "step_rot", "fd_step_trans", "fd_step_rot"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < self.grad_subsample <= 1.0:
            raise ValueError("grad_subsample must be in (0, 1]")


@dataclass
class OptimizeTrace:
    """Per-iteration history of a refinement run."""

    params: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    overlap: list = field(default_factory=list)
    status: str = STATUS_MAX_ITERS

    def record(self, params, loss, overlap):
        self.params.append(params)
        self.loss.append(float(loss))
        self.overlap.append(int(overlap))

    @property
    def n_iters(self):
        return len(self.loss)

    @property
    def best_index(self):
        return int(np.argmin(self.loss))

    @property
    def best_loss(self):
        return self.loss[self.best_index]

    @property
    def best_params(self):
        return self.params[self.best_index]


def sgd_step_schedule(cfg, iteration):
    """Step sizes at ``iteration``: initial steps times decay^(iter // patience)."""
    factor = cfg.decay ** (iteration // cfg.patience)
    return cfg.step_trans * factor, cfg.step_rot * factor


def fd_gradient(objective, p, cfg, rng=None):
    """Central-difference gradient of ``objective`` over the 9 parameters.

    Translation coordinates are probed with ``fd_step_trans`` (mm), the six
    rotation coordinates with ``fd_step_rot``. With ``grad_subsample`` < 1
    a seeded random coordinate subset is probed and the rest left at zero.
    Raises NonFiniteError when any probe evaluates non-finite.
    """
    vec = p.to_vector()
    grad = np.zeros(9)
    coords = np.arange(9)
    if cfg.grad_subsample < 1.0:
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        count = max(1, int(round(cfg.grad_subsample * 9)))
        coords = np.sort(rng.choice(9, size=count, replace=False))
    for i in coords:
        h = cfg.fd_step_trans if i < 3 else cfg.fd_step_rot
        probe = vec.copy()
        probe[i] = vec[i] + h
        f_plus = objective(TransformParams.from_vector(probe))
        probe[i] = vec[i] - h
        f_minus = objective(TransformParams.from_vector(probe))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError(f"objective non-finite at probe for coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def make_objective(volume, ref, cfg):
    """Loss callable over TransformParams: 1 - similarity of the slice
    extracted at the candidate pose against ``ref``. Returns
    (loss, overlap_count); poses without usable overlap get the
    NO_OVERLAP_LOSS sentinel.

    Equivalent to extract_slice + the public metric on every call, but the
    reference raster points, the flattened volume, and bounds checks are
    prepared once, since refinement evaluates this thousands of times.
    """
    points = ref.pixel_points().reshape(-1, 3)
    ref_vals = ref.intensities
    ref_mask = ref.mask
    dims = ref.dims
    origin = volume.origin
    inv_spacing = 1.0 / volume.spacing
    upper = np.array(volume.dims, dtype=float) - 1.0
    eps = 1e-9
    full_mask = bool(volume.mask.all())
    mask_field = None if full_mask else volume.mask.astype(float)

    def evaluate(params):
        t = params.to_transform()
        coords = points @ t.rotation.T + t.translation
        idx = (coords - origin) * inv_spacing
        valid = np.all((idx >= -eps) & (idx <= upper + eps), axis=-1)
        # interpolate everywhere with clipped indices; invalid samples are
        # masked out below so their (clamped) values never contribute
        vals = _interp_trilinear(volume.intensities, idx).reshape(dims)
        if full_mask:
            pred_mask = valid.reshape(dims)
        else:
            inside = _interp_trilinear(mask_field, idx) >= 0.5
            pred_mask = (valid & inside).reshape(dims)
        joint = pred_mask & ref_mask
        try:
            if cfg.metric == "lncc":
                res = lncc_masked(vals, ref_vals, joint, kernel=cfg.kernel,
                                  min_overlap=cfg.min_overlap)
            else:
                res = gncc_masked(vals, ref_vals, joint,
                                  min_overlap=cfg.min_overlap)
        except NoOverlapError as err:
            return NO_OVERLAP_LOSS, err.overlap_count
        except ZeroVarianceError:
            return NO_OVERLAP_LOSS, int(joint.sum())
        return 1.0 - res.value, res.overlap_count

    return evaluate


def refine(volume, ref, init, cfg=OptimizerConfig()):
    """Gradient-descend the pose from ``init`` to best match ``ref``.

    Returns (best transform, trace). Deterministic given the config seed.
    Raises LostOverlapError when the initial pose itself has no usable
    overlap; losing overlap mid-run ends the search with the best pose so
    far and status "lost_overlap".
    """
    objective = make_objective(volume, ref, cfg)
    rng = np.random.default_rng(cfg.seed)

    params = TransformParams.from_transform(init)
    loss, overlap = objective(params)
    if loss >= NO_OVERLAP_LOSS:
        raise LostOverlapError(
            f"initial pose yields only {overlap} px of valid overlap"
        )

    trace = OptimizeTrace()
    trace.record(params, loss, overlap)
    value_only = lambda p: objective(p)[0]

    backoff = 1.0
    status = STATUS_MAX_ITERS
    for it in range(cfg.max_iters):
        step_t, step_r = sgd_step_schedule(cfg, it)
        step_t *= backoff
        step_r *= backoff
        if step_t < cfg.min_step_trans and step_r < cfg.min_step_rot:
            status = STATUS_CONVERGED
            break

        try:
            grad = fd_gradient(value_only, params, cfg, rng)
        except NonFiniteError:
            status = STATUS_LOST_OVERLAP
            break
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            trace.record(params, loss, overlap)
            status = STATUS_CONVERGED
            break

        unit = grad / gnorm
        vec = params.to_vector()
        vec[:3] -= step_t * unit[:3]
        vec[3:] -= step_r * unit[3:]
        cand = TransformParams.from_vector(vec).canonical()
        cand_loss, cand_overlap = objective(cand)

        if cand_loss < loss:
            params, loss, overlap = cand, cand_loss, cand_overlap
            backoff = min(1.0, backoff * _BACKOFF_GROW)
        else:
            backoff *= _BACKOFF_SHRINK
        trace.record(params, loss, overlap)

        window = cfg.patience
        if trace.n_iters > window:
            if trace.loss[-1 - window] - trace.best_loss < cfg.tol:
                status = STATUS_CONVERGED
                break

    if loss >= NO_OVERLAP_LOSS:
        status = STATUS_LOST_OVERLAP
    trace.status = status
    best = trace.best_params
    return best.to_transform(), trace
