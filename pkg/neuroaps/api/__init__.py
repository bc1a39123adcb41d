__all__ = ["RegionLabel",
           "ClassLabel",
           "LabeledPoint",
           "PointCloud",
           "SliceImage",
           "RegionMasks",
           "SamplerKind",
           "SamplingBudget",
           "PhantomConfig",
           "ModelConfig",
           "TrainConfig",
           "ManifestRecord",
           "EvaluationResult",
           "LatencyResult",
           "RunRow",
           "RunReport",
           "ValidationResult",
           "Violation",
           "ALLOWED_SIZES",
           "DEFAULT_RATIOS",
           "N_REGIONS",
           "normalize_coordinates",
           "denormalize_coordinates",
           "validate_cloud",
           "region_counts",
           "NeuroApsException",
           "UsageException",
           "ConfigException",
           "DataException",
           "DegenerateInputException",
           "InvalidInputException",
           "NoBrainFoundException",
           "BudgetException",
           "SamplingException",
           "ShapeException",
           "FormatException",
           "LengthException",
           "RegionCodeException",
           "IntegrityException",
           "NumericalException"]

from neuroaps.api.dataclasses import *
from neuroaps.api.dataclasses import ALLOWED_SIZES, DEFAULT_RATIOS, N_REGIONS
from neuroaps.api.cloud import *
from neuroaps.api.exceptions import *
