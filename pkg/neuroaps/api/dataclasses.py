from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

__all__ = ["RegionLabel", "ClassLabel", "LabeledPoint", "PointCloud", "SliceImage", "RegionMasks", "SamplerKind",
           "SamplingBudget", "PhantomConfig", "ModelConfig", "TrainConfig", "ManifestRecord", "Violation",
           "ValidationResult", "EvaluationResult", "LatencyResult", "RunRow", "RunReport",
           "ALLOWED_SIZES", "DEFAULT_RATIOS", "N_REGIONS", "REPORT_COLUMNS"]

from neuroaps.api.exceptions import BudgetException, DegenerateInputException, InvalidInputException

"""
================================================================================
DATACLASSES: Estruturas de Dados do Sistema
================================================================================
Este módulo define as estruturas de dados principais do pipeline:
- RegionLabel / ClassLabel: rótulos anatômicos e de diagnóstico
- LabeledPoint / PointCloud: pontos (x, y, I, r) e nuvens de tamanho fixo
- SliceImage / RegionMasks: fatia 2D normalizada e máscaras por região
- SamplingBudget / SamplerKind: orçamento e variantes de amostragem
- PhantomConfig / ModelConfig / TrainConfig: configurações de cada etapa
- ManifestRecord, EvaluationResult, LatencyResult, RunRow, RunReport

Todos os tipos são imutáveis após a construção e podem ser compartilhados
entre threads.
"""

ALLOWED_SIZES = (2048, 4096, 8192)


class RegionLabel(IntEnum):
    HIPPOCAMPUS = 0
    VENTRICLES = 1
    SURFACE = 2
    INTERIOR = 3

    def __str__(self):
        return self.name.lower()


N_REGIONS = len(RegionLabel)


class ClassLabel(IntEnum):
    CN = 0
    AD = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, ClassLabel):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise InvalidInputException("Unknown class label {}".format(value))
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise InvalidInputException("Unknown class label {!r}".format(value))

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class LabeledPoint:
    x: float
    y: float
    intensity: float
    region: RegionLabel

    def to_dict(self):
        return dict(x=self.x, y=self.y, intensity=self.intensity, region=int(self.region))


def _frozen_array(values, dtype):
    array = np.array(values, dtype=dtype, copy=True).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    Nuvem de pontos rotulada, armazenada como colunas numpy.

    Coordenadas e intensidades ficam em float32 (mesma precisão do formato
    APC1), de modo que decode(encode(cloud)) == cloud.
    """
    x: np.ndarray
    y: np.ndarray
    intensity: np.ndarray
    region: np.ndarray
    class_label: Optional[ClassLabel] = None
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x, np.float32))
        object.__setattr__(self, "y", _frozen_array(self.y, np.float32))
        object.__setattr__(self, "intensity", _frozen_array(self.intensity, np.float32))
        object.__setattr__(self, "region", _frozen_array(self.region, np.uint8))
        if self.class_label is not None:
            object.__setattr__(self, "class_label", ClassLabel.parse(self.class_label))
        n = len(self.x)
        if not (len(self.y) == n and len(self.intensity) == n and len(self.region) == n):
            raise InvalidInputException("PointCloud columns have different lengths")

    @classmethod
    def from_points(cls, points, class_label=None, source_id=""):
        points = list(points)
        return cls(x=[p.x for p in points], y=[p.y for p in points],
                   intensity=[p.intensity for p in points], region=[int(p.region) for p in points],
                   class_label=class_label, source_id=source_id)

    def __len__(self):
        return len(self.x)

    def __getitem__(self, index):
        return LabeledPoint(float(self.x[index]), float(self.y[index]), float(self.intensity[index]),
                            RegionLabel(int(self.region[index])))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def points(self) -> List[LabeledPoint]:
        return list(self)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (self.class_label == other.class_label and self.source_id == other.source_id
                and np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)
                and np.array_equal(self.intensity, other.intensity)
                and np.array_equal(self.region, other.region))

    __hash__ = None

    def permuted(self, order):
        order = np.asarray(order)
        return PointCloud(self.x[order], self.y[order], self.intensity[order], self.region[order],
                          self.class_label, self.source_id)

    def with_columns(self, x=None, y=None, intensity=None, region=None):
        return PointCloud(self.x if x is None else x, self.y if y is None else y,
                          self.intensity if intensity is None else intensity,
                          self.region if region is None else region,
                          self.class_label, self.source_id)

    def __str__(self):
        return "source_id={} n={} class={}".format(self.source_id, len(self), self.class_label)


@dataclass(frozen=True, eq=False)
class SliceImage:
    pixels: np.ndarray

    MIN_SIZE = 32

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64, copy=True)
        if pixels.ndim != 2:
            raise DegenerateInputException("SliceImage needs a 2D pixel grid, got shape {}".format(pixels.shape))
        if pixels.shape[0] < self.MIN_SIZE or pixels.shape[1] < self.MIN_SIZE:
            raise DegenerateInputException("SliceImage must be at least {0}x{0}, got {1}x{2}".format(
                self.MIN_SIZE, pixels.shape[1], pixels.shape[0]))
        if not np.isfinite(pixels).all():
            raise InvalidInputException("SliceImage contains non-finite pixels")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class RegionMasks:
    """
    Máscaras booleanas por região, com a mesma forma da fatia.

    As quatro regiões formam uma partição da máscara do cérebro.
    """
    brain: np.ndarray
    hippocampus: np.ndarray
    ventricles: np.ndarray
    surface: np.ndarray
    interior: np.ndarray

    def __post_init__(self):
        shape = np.shape(self.brain)
        for name in ("brain", "hippocampus", "ventricles", "surface", "interior"):
            mask = np.array(getattr(self, name), dtype=bool, copy=True)
            if mask.shape != shape:
                raise InvalidInputException("Mask {} has shape {}, expected {}".format(name, mask.shape, shape))
            mask.setflags(write=False)
            object.__setattr__(self, name, mask)

    @property
    def shape(self):
        return self.brain.shape

    def mask(self, region: RegionLabel) -> np.ndarray:
        return getattr(self, str(RegionLabel(region)))

    def label_map(self) -> np.ndarray:
        """Mapa de rótulos por pixel: código da região ou -1 fora do cérebro."""
        labels = np.full(self.shape, -1, dtype=np.int8)
        labels[self.brain] = int(RegionLabel.INTERIOR)
        labels[self.surface] = int(RegionLabel.SURFACE)
        labels[self.ventricles] = int(RegionLabel.VENTRICLES)
        labels[self.hippocampus] = int(RegionLabel.HIPPOCAMPUS)
        return labels

    def availability(self) -> Tuple[int, ...]:
        return tuple(int(self.mask(r).sum()) for r in RegionLabel)

    def check(self) -> List[str]:
        problems = []
        for region in RegionLabel:
            if np.any(self.mask(region) & ~self.brain):
                problems.append("{} mask is not a subset of the brain mask".format(region))
        if np.any(self.hippocampus & self.ventricles):
            problems.append("hippocampus and ventricles masks overlap")
        expected_interior = self.brain & ~(self.hippocampus | self.ventricles | self.surface)
        if not np.array_equal(expected_interior, self.interior):
            problems.append("interior mask differs from brain minus the other regions")
        return problems


class SamplerKind(Enum):
    APS = "aps"
    UNIFORM_ROI = "uniform-roi"
    UNIFORM_NO_ROI = "uniform"
    RANDOM_ROI = "random-roi"
    RANDOM_NO_ROI = "random"

    @property
    def uses_roi(self):
        return self in (SamplerKind.APS, SamplerKind.UNIFORM_ROI, SamplerKind.RANDOM_ROI)

    @property
    def order(self):
        return list(SamplerKind).index(self)

    def __str__(self):
        return self.value


DEFAULT_RATIOS = (0.25, 0.25, 0.30, 0.20)


@dataclass(frozen=True)
class SamplingBudget:
    ratios: Tuple[float, float, float, float] = DEFAULT_RATIOS
    total_n: int = 8192

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        if len(ratios) != N_REGIONS:
            raise BudgetException("Expected {} ratios, got {}".format(N_REGIONS, len(ratios)))
        if any(r < 0 or not np.isfinite(r) for r in ratios):
            raise BudgetException("Sampling ratios must be finite and non-negative: {}".format(ratios))
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise BudgetException("Sampling ratios must sum to 1, got {}".format(sum(ratios)))
        if int(self.total_n) < 1:
            raise BudgetException("total_n must be positive, got {}".format(self.total_n))
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "total_n", int(self.total_n))


@dataclass(frozen=True)
class PhantomConfig:
    image_size: int = 128
    ventricle_scale_ad: float = 1.6
    ventricle_scale_cn: float = 1.0
    hippocampus_scale_ad: float = 0.6
    hippocampus_scale_cn: float = 1.0
    noise_sigma: float = 0.05
    seed: int = 0
    surface_thickness: int = 2
    shape_jitter: float = 0.08
    intensity_surface: float = 0.55
    intensity_interior: float = 0.8
    intensity_ventricles: float = 0.3
    intensity_hippocampus: float = 0.45

    def __post_init__(self):
        scales = (self.ventricle_scale_ad, self.ventricle_scale_cn, self.hippocampus_scale_ad, self.hippocampus_scale_cn)
        if any(s <= 0 for s in scales):
            raise InvalidInputException("Phantom scales must be positive")
        if not self.ventricle_scale_ad > self.ventricle_scale_cn:
            raise InvalidInputException("AD ventricle scale must exceed the CN ventricle scale")
        if not self.hippocampus_scale_ad < self.hippocampus_scale_cn:
            raise InvalidInputException("AD hippocampus scale must be below the CN hippocampus scale")
        if self.noise_sigma < 0:
            raise InvalidInputException("noise_sigma must be non-negative")
        if self.surface_thickness < 1:
            raise InvalidInputException("surface_thickness must be at least 1 pixel")

    def region_mean(self, region: RegionLabel) -> float:
        return getattr(self, "intensity_{}".format(RegionLabel(region)))


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 3 + N_REGIONS
    encoder_dims: Tuple[int, ...] = (64, 128, 256)
    fusion_dim: int = 256
    head_dims: Tuple[int, ...] = (512, 128, 2)
    init_seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "encoder_dims", tuple(int(d) for d in self.encoder_dims))
        object.__setattr__(self, "head_dims", tuple(int(d) for d in self.head_dims))
        if self.input_dim != 3 + N_REGIONS:
            raise InvalidInputException("input_dim must be {}".format(3 + N_REGIONS))
        if self.encoder_dims[-1] != self.fusion_dim:
            raise InvalidInputException("last encoder dim must equal fusion_dim")
        if self.head_dims and (self.head_dims[0] != 2 * self.fusion_dim or self.head_dims[-1] != 2):
            raise InvalidInputException("head must map {} features to 2 classes".format(2 * self.fusion_dim))
        if self.dtype not in ("float32", "float64"):
            raise InvalidInputException("dtype must be float32 or float64")

    def to_dict(self):
        return dict(input_dim=self.input_dim, encoder_dims=list(self.encoder_dims), fusion_dim=self.fusion_dim,
                    head_dims=list(self.head_dims), init_seed=self.init_seed, dtype=self.dtype)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 16
    jitter_sigma: float = 0.01
    dropout_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InvalidInputException("learning_rate must be non-negative")
        if not 0 <= self.dropout_fraction < 1:
            raise InvalidInputException("dropout_fraction must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidInputException("batch_size must be >= 1 and epochs >= 0")
        if self.jitter_sigma < 0:
            raise InvalidInputException("jitter_sigma must be non-negative")


@dataclass(frozen=True)
class ManifestRecord:
    sample_id: str
    label: ClassLabel
    path: str
    split: str

    def __post_init__(self):
        for name in ("sample_id", "path"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise InvalidInputException("Manifest field {} must be a non-empty string, got {!r}".format(name, value))
        object.__setattr__(self, "label", ClassLabel.parse(self.label))
        if self.split not in ("train", "test"):
            raise InvalidInputException("Unknown split tag {}".format(self.split))

    def to_dict(self):
        return dict(sample_id=self.sample_id, label=str(self.label), path=self.path, split=self.split)


@dataclass(frozen=True)
class Violation:
    index: Optional[int]
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self):
        return len(self.violations) == 0

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class EvaluationResult:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def to_dict(self):
        return dict(accuracy=self.accuracy, tp=self.tp, tn=self.tn, fp=self.fp, fn=self.fn)


@dataclass(frozen=True)
class LatencyResult:
    median_ms: float
    min_ms: float
    max_ms: float
    samples_ms: Tuple[float, ...] = ()


REPORT_COLUMNS = ["variant", "n_points", "seed", "accuracy", "latency_ms", "peak_workspace_bytes"]


@dataclass(frozen=True)
class RunRow:
    variant: SamplerKind
    n_points: int
    seed: int
    accuracy: float
    latency_ms: float
    peak_workspace_bytes: int
    sampling_ms: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise InvalidInputException("accuracy out of range: {}".format(self.accuracy))
        if not self.latency_ms > 0:
            raise InvalidInputException("latency must be positive: {}".format(self.latency_ms))

    def to_dict(self):
        return dict(variant=str(self.variant), n_points=self.n_points, seed=self.seed, accuracy=self.accuracy,
                    latency_ms=self.latency_ms, peak_workspace_bytes=self.peak_workspace_bytes)


@dataclass
class RunReport:
    rows: List[RunRow] = field(default_factory=list)

    def add(self, row: RunRow):
        key = (row.variant, row.n_points, row.seed)
        if any((r.variant, r.n_points, r.seed) == key for r in self.rows):
            raise InvalidInputException("Duplicate report row for {}".format(key))
        self.rows.append(row)

    def sorted(self):
        return RunReport(sorted(self.rows, key=lambda r: (r.variant.order, r.n_points, r.seed)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=REPORT_COLUMNS)

    def summary(self) -> pd.DataFrame:
        """Média e desvio padrão por (variante, número de pontos) sobre as sementes."""
        frame = self.to_frame()
        if frame.empty:
            return pd.DataFrame(columns=["variant", "n_points", "runs", "accuracy_mean", "accuracy_std",
                                         "latency_ms_mean", "latency_ms_std", "peak_workspace_bytes_mean"])
        grouped = frame.groupby(["variant", "n_points"], sort=False)
        summary = grouped.agg(runs=("seed", "count"),
                              accuracy_mean=("accuracy", "mean"), accuracy_std=("accuracy", "std"),
                              latency_ms_mean=("latency_ms", "mean"), latency_ms_std=("latency_ms", "std"),
                              peak_workspace_bytes_mean=("peak_workspace_bytes", "mean"))
        return summary.fillna(0.0).reset_index()

    def to_dict(self):
        return dict(rows=[dict(r.to_dict(), sampling_ms=r.sampling_ms) for r in self.rows],
                    summary=self.summary().to_dict(orient="records"))
