"""svreg: slice-to-volume rigid registration at desk scale.

Aligns a 2D image to a 3D volume by gradient descent over a continuous
6D-rotation + 3D-translation pose parameterization, scored by a masked,
intersection-aware local normalized cross-correlation, with a temporal
warm-start workflow, a synthetic phantom oracle, and an evaluation harness.
"""

from .errors import (
    ConstantImageWarning,
    DegenerateInputError,
    EmptyImageError,
    EmptyInputError,
    GeometryOutOfBoundsError,
    LostOverlapError,
    NoOverlapError,
    NonFiniteError,
    NoPairsError,
    SvregError,
    ZeroVarianceError,
)
from .geometry import (
    EulerAnglesXYZ,
    RigidTransform,
    Rotation6D,
    TransformParams,
    compose,
    euler_to_matrix,
    geodesic_error,
    gram_schmidt_6d_to_matrix,
    matrix_to_6d,
    matrix_to_euler,
)
from .imaging import (
    Image2D,
    Volume3D,
    center_crop_pad,
    normalize_intensity,
    preprocess,
    resample_isotropic,
    slice_geometry,
)
from .metrics import LossWeights, MetricResult, combined_loss, gncc, lncc, translation_mse
from .optimizer import OptimizerConfig, OptimizeTrace, fd_gradient, refine, sgd_step_schedule
from .registration import SliceToVolumeRegistration
from .resampler import SamplingGrid, extract_slice, make_slice_grid, transform_volume
from .workflow import FrameInput, FrameResult, WorkflowConfig, classify_success, register_sequence

__version__ = "0.1.0"

__all__ = [
    "ConstantImageWarning",
    "DegenerateInputError",
    "EmptyImageError",
    "EmptyInputError",
    "EulerAnglesXYZ",
    "FrameInput",
    "FrameResult",
    "GeometryOutOfBoundsError",
    "Image2D",
    "LossWeights",
    "LostOverlapError",
    "MetricResult",
    "NoOverlapError",
    "NonFiniteError",
    "NoPairsError",
    "OptimizeTrace",
    "OptimizerConfig",
    "RigidTransform",
    "Rotation6D",
    "SamplingGrid",
    "SliceToVolumeRegistration",
    "SvregError",
    "TransformParams",
    "Volume3D",
    "WorkflowConfig",
    "ZeroVarianceError",
    "center_crop_pad",
    "classify_success",
    "combined_loss",
    "compose",
    "euler_to_matrix",
    "extract_slice",
    "fd_gradient",
    "geodesic_error",
    "gncc",
    "gram_schmidt_6d_to_matrix",
    "lncc",
    "make_slice_grid",
    "matrix_to_6d",
    "matrix_to_euler",
    "normalize_intensity",
    "preprocess",
    "refine",
    "register_sequence",
    "resample_isotropic",
    "sgd_step_schedule",
    "slice_geometry",
    "transform_volume",
    "translation_mse",
]
