"""Run configuration: one JSON document wiring preprocessing, metric,
loss weights, optimizer, and workflow policy together.

Defaults carry the reference constants: 0.5 mm isotropic spacing, 400x320
slice / 400x320x240 volume crops, LNCC kernel 51, and 20:1:10 loss weights.
Unknown keys anywhere in the document are rejected so typos cannot silently
fall back to defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from .metrics import LossWeights
from .optimizer import OptimizerConfig
from .workflow import WorkflowConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PreprocessConfig:
    spacing_mm: float = 0.5
    crop_2d: tuple = (400, 320)
    crop_3d: tuple = (400, 320, 240)

    def __post_init__(self):
        if self.spacing_mm <= 0:
            raise ValueError("spacing_mm must be positive")
        object.__setattr__(self, "crop_2d", tuple(int(n) for n in self.crop_2d))
        object.__setattr__(self, "crop_3d", tuple(int(n) for n in self.crop_3d))
        if len(self.crop_2d) != 2 or len(self.crop_3d) != 3:
            raise ValueError("crop_2d must have 2 dims and crop_3d 3 dims")
        if min(self.crop_2d) < 1 or min(self.crop_3d) < 1:
            raise ValueError("crop dims must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    preprocessing: PreprocessConfig = field(default_factory=PreprocessConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    workflow: WorkflowConfig = field(default_factory=WorkflowConfig)
    seed: int = 0

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "preprocessing": {
                "spacing_mm": self.preprocessing.spacing_mm,
                "crop_2d": list(self.preprocessing.crop_2d),
                "crop_3d": list(self.preprocessing.crop_3d),
            },
            "weights": asdict(self.weights),
            "optimizer": asdict(self.optimizer),
            "workflow": asdict(self.workflow),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        known = {"schema_version", "preprocessing", "weights", "optimizer",
                 "workflow", "seed"}
        _reject_unknown(data, known, "config")
        kwargs = {}
        if "preprocessing" in data:
            kwargs["preprocessing"] = _build(PreprocessConfig,
                                             data["preprocessing"], "preprocessing")
        if "weights" in data:
            kwargs["weights"] = _build(LossWeights, data["weights"], "weights")
        if "optimizer" in data:
            kwargs["optimizer"] = _build(OptimizerConfig, data["optimizer"],
                                         "optimizer")
        if "workflow" in data:
            kwargs["workflow"] = _build(WorkflowConfig, data["workflow"], "workflow")
        if "seed" in data:
            kwargs["seed"] = int(data["seed"])
        return cls(**kwargs)


def _reject_unknown(data, known, where):
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")


def _build(cls, data, where):
    names = {f.name for f in fields(cls)}
    _reject_unknown(data, names, where)
    coerced = {}
    for key, value in data.items():
        coerced[key] = tuple(value) if isinstance(value, list) else value
    return cls(**coerced)
