"""The temporal registration loop: warm-started per-frame corrections.

Each frame arrives with a tracker-reported slice-to-volume pose that is
blind to internal motion. The initial pose for frame i composes the tracked
pose with the previous frame's correction (the warm start), a registration
module refines it, and the leftover correction is carried to the next
frame. A frame failure never aborts the sequence; by default it resets the
warm start to identity.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import LostOverlapError
from .geometry import RigidTransform, compose

FRAME_SUCCESS = "success"
FRAME_LOST_OVERLAP = "lost_overlap"
FRAME_DIVERGED = "diverged"

FAILURE_RESET = "reset"
FAILURE_CARRY = "carry"


@dataclass(frozen=True)
class FrameInput:
    """One time point: the live 2D image plus the arm-reported pose."""

    timestamp: float
    image: object
    tracked: RigidTransform


@dataclass(frozen=True)
class FrameResult:
    """Per-frame outcome: the correction transform and bookkeeping."""

    correction: RigidTransform
    status: str
    runtime_ms: float
    metric_value: float
    iterations: int = 0


@dataclass(frozen=True)
class WorkflowConfig:
    """Sequence-level policy knobs.

    ``failure_policy`` decides the next frame's warm start after a failed
    frame: "reset" uses identity, "carry" keeps the last good correction.
    ``warm_start`` False forces a cold identity start on every frame.
    """

    warm_start: bool = True
    failure_policy: str = FAILURE_RESET

    def __post_init__(self):
        if self.failure_policy not in (FAILURE_RESET, FAILURE_CARRY):
            raise ValueError(
                f"failure_policy must be 'reset' or 'carry', got {self.failure_policy!r}"
            )


def classify_success(err):
    """The 10-mm rule: success iff the Euclidean translation error < 10 mm."""
    return err.euclidean < 10.0


def register_sequence(volume, frames, module, cfg=WorkflowConfig()):
    """Run the registration module over an ordered frame sequence.

    For frame i the initial pose is compose(tracked_i, correction_{i-1})
    with the first correction the identity. The module's refined full pose
    is folded back into a fresh correction for frame i; failures yield a
    per-frame status and the policy-defined warm start for the next frame.

    Returns the list of FrameResult, one per frame, in order.
    """
    if not frames:
        raise ValueError("frame sequence is empty")
    timestamps = [f.timestamp for f in frames]
    if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
        raise ValueError("frame timestamps must be strictly increasing")

    results = []
    prev_correction = RigidTransform.identity()
    for frame in frames:
        warm = prev_correction if cfg.warm_start else RigidTransform.identity()
        init = compose(frame.tracked, warm)
        start = time.perf_counter()
        try:
            full_pose, trace = module.register(volume, frame.image, init)
        except LostOverlapError:
            runtime_ms = (time.perf_counter() - start) * 1000.0
            results.append(
                FrameResult(RigidTransform.identity(), FRAME_LOST_OVERLAP,
                            runtime_ms, float("nan"))
            )
            if cfg.failure_policy == FAILURE_RESET:
                prev_correction = RigidTransform.identity()
            continue
        runtime_ms = (time.perf_counter() - start) * 1000.0

        correction = compose(frame.tracked.inverse(), full_pose)
        metric_value = 1.0 - trace.best_loss
        if trace.status == "lost_overlap":
            status = FRAME_LOST_OVERLAP
        elif not (metric_value == metric_value):  # NaN guard
            status = FRAME_DIVERGED
        else:
            status = FRAME_SUCCESS

        results.append(
            FrameResult(correction, status, runtime_ms, metric_value,
                        trace.n_iters)
        )
        if status == FRAME_SUCCESS:
            prev_correction = correction
        elif cfg.failure_policy == FAILURE_RESET:
            prev_correction = RigidTransform.identity()
    return results
