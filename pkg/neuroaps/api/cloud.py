import numpy as np

from neuroaps.api.dataclasses import N_REGIONS, PointCloud, ValidationResult, Violation
from neuroaps.api.exceptions import DegenerateInputException

__all__ = ["normalize_coordinates", "denormalize_coordinates", "validate_cloud", "region_counts"]


def normalize_coordinates(px, py, width, height):
    """
    Converte coordenadas de pixel para o intervalo [-1, 1].

    O centro de cada pixel é mapeado com meio pixel de deslocamento:
    x' = 2 * (px + 0.5) / width - 1, e o mesmo para y com height.

    Args:
        px: coordenadas de coluna (escalar ou array)
        py: coordenadas de linha (escalar ou array)
        width: largura da imagem em pixels
        height: altura da imagem em pixels

    Returns:
        Tupla (x, y) em float64, na mesma ordem da entrada
    """
    if width < 1 or height < 1:
        raise DegenerateInputException("Cannot normalize coordinates on a {}x{} grid".format(width, height))
    x = 2.0 * (np.asarray(px, dtype=np.float64) + 0.5) / width - 1.0
    y = 2.0 * (np.asarray(py, dtype=np.float64) + 0.5) / height - 1.0
    return x, y


def denormalize_coordinates(x, y, width, height):
    if width < 1 or height < 1:
        raise DegenerateInputException("Cannot denormalize coordinates on a {}x{} grid".format(width, height))
    px = (np.asarray(x, dtype=np.float64) + 1.0) * width / 2.0 - 0.5
    py = (np.asarray(y, dtype=np.float64) + 1.0) * height / 2.0 - 0.5
    return px, py


def _index_violations(mask, rule, message):
    return [Violation(int(i), rule, message) for i in np.flatnonzero(mask)]


def validate_cloud(cloud: PointCloud, expected_n: int) -> ValidationResult:
    violations = []
    if len(cloud) != expected_n:
        violations.append(Violation(None, "size", "expected {} points, got {}".format(expected_n, len(cloud))))
    with np.errstate(invalid="ignore"):
        violations += _index_violations(~(np.isfinite(cloud.x) & (np.abs(cloud.x) <= 1.0)),
                                        "x-range", "x must be finite and within [-1, 1]")
        violations += _index_violations(~(np.isfinite(cloud.y) & (np.abs(cloud.y) <= 1.0)),
                                        "y-range", "y must be finite and within [-1, 1]")
        violations += _index_violations(~((cloud.intensity >= 0.0) & (cloud.intensity <= 1.0)),
                                        "intensity-range", "intensity must be within [0, 1]")
    violations += _index_violations(cloud.region >= N_REGIONS, "region-code", "region code must be 0..3")
    violations.sort(key=lambda v: (-1 if v.index is None else v.index, v.rule))
    return ValidationResult(tuple(violations))


def region_counts(cloud: PointCloud):
    return tuple(int(c) for c in np.bincount(cloud.region, minlength=N_REGIONS)[:N_REGIONS])
