"""Estimator-style front end for slice-to-volume registration.

``SliceToVolumeRegistration`` follows the scikit-learn parameter protocol
(constructor hyperparameters, ``get_params`` / ``set_params``, fitted
attributes with trailing underscores) so the engine composes with generic
tooling, while a stateless ``register`` method doubles as the pluggable
registration-module interface the temporal workflow expects.
"""

from __future__ import annotations

import inspect

import numpy as np

from .geometry import RigidTransform
from .optimizer import OptimizerConfig, refine
from .resampler import extract_slice, make_slice_grid


class NotFittedError(ValueError):
    """fit() has not been called yet."""


class SliceToVolumeRegistration:
    """Estimate the rigid pose of a 2D image inside a 3D volume.

    Parameters mirror :class:`~svreg.optimizer.OptimizerConfig`; see there
    for semantics. After ``fit`` the instance exposes ``transform_`` (the
    refined slice-to-volume pose), ``trace_`` (the optimization history),
    ``metric_value_`` (final similarity) and ``n_iter_``.
    """

    def __init__(self, metric="lncc", kernel=51, max_iters=200, step_trans=0.5,
                 step_rot=0.01, fd_step_trans=0.25, fd_step_rot=0.005,
                 decay=0.8, patience=80, tol=1e-6, seed=0, min_overlap=64,
                 grad_subsample=1.0):
        self.metric = metric
        self.kernel = kernel
        self.max_iters = max_iters
        self.step_trans = step_trans
        self.step_rot = step_rot
        self.fd_step_trans = fd_step_trans
        self.fd_step_rot = fd_step_rot
        self.decay = decay
        self.patience = patience
        self.tol = tol
        self.seed = seed
        self.min_overlap = min_overlap
        self.grad_subsample = grad_subsample

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}"
                )
            setattr(self, name, value)
        return self

    def _config(self):
        return OptimizerConfig(**self.get_params())

    @classmethod
    def from_config(cls, cfg):
        est = cls()
        for name in cls._param_names():
            setattr(est, name, getattr(cfg, name))
        return est

    def register(self, volume, image, init=None):
        """Stateless refinement: returns (transform, trace).

        This is the registration-module interface the temporal workflow
        consumes; any object with this method can be plugged in.
        """
        if init is None:
            init = RigidTransform.identity()
        return refine(volume, image, init, self._config())

    def fit(self, volume, image, init=None):
        """Refine the pose of ``image`` within ``volume`` starting at ``init``."""
        transform, trace = self.register(volume, image, init)
        self.transform_ = transform
        self.trace_ = trace
        self.metric_value_ = 1.0 - trace.best_loss
        self.n_iter_ = trace.n_iters
        return self

    def _check_fitted(self):
        if not hasattr(self, "transform_"):
            raise NotFittedError(
                "this SliceToVolumeRegistration instance is not fitted yet"
            )

    def predict(self, points):
        """Map slice-frame physical points (..., 3) into the volume frame."""
        self._check_fitted()
        return self.transform_.apply(np.asarray(points, dtype=float))

    def transform(self, volume, slice_spec):
        """Extract the registered slice from ``volume`` on ``slice_spec``'s raster."""
        self._check_fitted()
        grid = make_slice_grid(slice_spec, self.transform_, volume)
        return extract_slice(volume, grid)
