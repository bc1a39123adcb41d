import logging

import numpy as np
from scipy import ndimage

from neuroaps.api.dataclasses import RegionMasks, SliceImage
from neuroaps.api.exceptions import DegenerateInputException, InvalidInputException, NoBrainFoundException
from neuroaps.controller.phantom_controller import Phantom, build_masks

logger = logging.getLogger(__name__)


def normalize_array(values):
    """
    Normalização min-max: v' = (v - min) / (max - min).

    Uma imagem constante vira zeros.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DegenerateInputException("cannot normalize an empty image")
    if not np.isfinite(values).all():
        raise InvalidInputException("image contains NaN or infinite pixels")
    low = values.min()
    span = values.max() - low
    if span == 0:
        return np.zeros_like(values)
    return (values - low) / span


def intensity_normalize(raw) -> SliceImage:
    return SliceImage(normalize_array(raw))


def disk(radius):
    radius = int(radius)
    rows, cols = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return rows * rows + cols * cols <= radius * radius


def largest_component(mask):
    """
    Maior componente 4-conexa da máscara.

    Em caso de empate vence o rótulo mais baixo, ou seja, a componente cujo
    primeiro pixel aparece antes na ordem de varredura por linhas.
    """
    labels, count = ndimage.label(mask)
    if count == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.reshape(-1))[1:]
    return labels == int(np.argmax(sizes)) + 1


def compute_brain_mask(image: SliceImage, threshold=0.1, closing_radius=2):
    """
    Máscara do cérebro: limiar, fechamento morfológico e maior componente.

    Args:
        image: SliceImage normalizada
        threshold: fração em (0, 1)
        closing_radius: raio do disco do fechamento, em pixels

    Returns:
        Array booleano com uma única região conexa
    """
    if not 0.0 < threshold < 1.0:
        raise InvalidInputException("threshold must be in (0, 1), got {}".format(threshold))
    if closing_radius < 0:
        raise InvalidInputException("closing_radius must be non-negative, got {}".format(closing_radius))
    foreground = image.pixels >= threshold
    if not foreground.any():
        raise NoBrainFoundException("no pixel reaches threshold {}".format(threshold))
    if closing_radius > 0:
        pad = closing_radius + 1
        padded = np.pad(foreground, pad, mode="constant", constant_values=False)
        closed = ndimage.binary_closing(padded, structure=disk(closing_radius))
        foreground = closed[pad:-pad, pad:-pad] | foreground
    mask = largest_component(foreground)
    if not mask.any():
        raise NoBrainFoundException("empty foreground after refinement")
    return mask


def refine_masks(masks: RegionMasks, brain, surface_thickness=2) -> RegionMasks:
    """Recorta as máscaras de região para a máscara de cérebro calculada."""
    return build_masks(brain, masks.hippocampus, masks.ventricles, surface_thickness)


"""
================================================================================
CONTROLLER: PreprocessController
================================================================================
Aplica normalização de intensidade e extração da máscara do cérebro antes da
amostragem, usando os parâmetros da seção `preprocess` do config.yaml.
"""
class PreprocessController:

    def __init__(self, neuroaps):
        self.neuroaps = neuroaps
        self.logger = logging.getLogger(__name__)

    def prepare(self, phantom: Phantom, threshold=None, closing_radius=None):
        static = self.neuroaps.static_config["preprocess"]
        threshold = static["threshold"] if threshold is None else threshold
        closing_radius = static["closing_radius"] if closing_radius is None else closing_radius
        thickness = self.neuroaps.static_config["phantom"]["surface_thickness"]

        image = intensity_normalize(phantom.slice.pixels)
        brain = compute_brain_mask(image, threshold, closing_radius)
        agreement = float(np.mean(brain == phantom.masks.brain))
        self.logger.debug("brain mask agreement with ground truth %.4f", agreement)
        return Phantom(image, refine_masks(phantom.masks, brain, thickness), phantom.label)
