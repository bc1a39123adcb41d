import logging
import os
from collections import namedtuple

import numpy as np
import shortuuid
from scipy import ndimage

from neuroaps.api.dataclasses import (ClassLabel, ManifestRecord, PhantomConfig, RegionLabel, RegionMasks,
                                      SliceImage)
from neuroaps.api.exceptions import DegenerateInputException, FormatException, InvalidInputException
from neuroaps.utils.utils import atomic_write

logger = logging.getLogger(__name__)

Phantom = namedtuple("Phantom", ["slice", "masks", "label"])

CROSS = ndimage.generate_binary_structure(2, 1)


def sample_seed(seed, label, sample_index):
    """Semente independente por amostra, derivada de (seed, classe, índice)."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(ClassLabel.parse(label)), int(sample_index)])


def sample_id(seed, label, sample_index):
    label = ClassLabel.parse(label)
    digest = shortuuid.uuid(name="neuroaps/{}/{}/{}".format(seed, label.name, sample_index))[:8]
    return "{}-{:04d}-{}".format(label.name, sample_index, digest)


def _ellipse(rows, cols, center, semi_axes, wobble=None):
    dy = (rows - center[0]) / semi_axes[0]
    dx = (cols - center[1]) / semi_axes[1]
    radius = 1.0
    if wobble is not None:
        amplitude, frequency, phase = wobble
        theta = np.arctan2(rows - center[0], cols - center[1])
        radius = 1.0 + amplitude * np.sin(frequency * theta + phase)
    return dx * dx + dy * dy <= radius * radius


def surface_band(brain, thickness):
    """Faixa de `thickness` pixels logo dentro da borda da máscara do cérebro."""
    eroded = ndimage.binary_erosion(brain, structure=CROSS, iterations=thickness, border_value=0)
    return brain & ~eroded


def build_masks(brain, hippocampus, ventricles, thickness):
    brain = np.asarray(brain, dtype=bool)
    ventricles = np.asarray(ventricles, dtype=bool) & brain
    hippocampus = np.asarray(hippocampus, dtype=bool) & brain & ~ventricles
    surface = surface_band(brain, thickness) & ~(hippocampus | ventricles)
    interior = brain & ~(hippocampus | ventricles | surface)
    return RegionMasks(brain=brain, hippocampus=hippocampus, ventricles=ventricles, surface=surface,
                       interior=interior)


def generate_phantom(config: PhantomConfig, label, sample_index) -> Phantom:
    """
    Gera uma fatia sintética determinística com máscaras de região.

    Geometria (em frações do tamanho da imagem):
    - cérebro: elipse com borda perturbada por uma senoide
    - ventrículos: dois lobos centrais, raio multiplicado pela escala da classe
    - hipocampo: duas manchas mediais, área multiplicada pela escala da classe

    Args:
        config: PhantomConfig
        label: ClassLabel (AD ou CN)
        sample_index: índice da amostra dentro da classe

    Returns:
        Phantom(slice, masks, label)
    """
    label = ClassLabel.parse(label)
    size = int(config.image_size)
    if size < SliceImage.MIN_SIZE:
        raise DegenerateInputException("image_size must be at least {}, got {}".format(SliceImage.MIN_SIZE, size))
    rng = np.random.default_rng(sample_seed(config.seed, label, sample_index))

    def jitter():
        return 1.0 + config.shape_jitter * rng.uniform(-1.0, 1.0)

    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    center = ((size - 1) / 2.0, (size - 1) / 2.0)

    wobble = (0.03 + 0.01 * rng.uniform(), float(rng.integers(4, 8)), rng.uniform(0.0, 2.0 * np.pi))
    brain = _ellipse(rows, cols, center, (0.42 * size * jitter(), 0.36 * size * jitter()), wobble)

    if label == ClassLabel.AD:
        ventricle_scale, hippocampus_scale = config.ventricle_scale_ad, config.hippocampus_scale_ad
    else:
        ventricle_scale, hippocampus_scale = config.ventricle_scale_cn, config.hippocampus_scale_cn

    ventricles = np.zeros_like(brain)
    for side in (-1.0, 1.0):
        lobe_center = (center[0] - 0.02 * size, center[1] + side * 0.045 * size)
        semi_axes = (0.10 * size * ventricle_scale * jitter(), 0.035 * size * ventricle_scale * jitter())
        ventricles |= _ellipse(rows, cols, lobe_center, semi_axes)

    hippocampus = np.zeros_like(brain)
    radius = 0.05 * size * np.sqrt(hippocampus_scale)
    for side in (-1.0, 1.0):
        blob_center = (center[0] + 0.17 * size, center[1] + side * 0.17 * size)
        hippocampus |= _ellipse(rows, cols, blob_center, (radius * jitter(), radius * jitter()))

    masks = build_masks(brain, hippocampus, ventricles, config.surface_thickness)

    pixels = np.zeros((size, size), dtype=np.float64)
    for region in RegionLabel:
        mask = masks.mask(region)
        pixels[mask] = config.region_mean(region)
    if config.noise_sigma > 0:
        noise = rng.normal(0.0, config.noise_sigma, size=(size, size))
        pixels[masks.brain] += noise[masks.brain]
    np.clip(pixels, 0.0, 1.0, out=pixels)

    return Phantom(SliceImage(pixels), masks, label)


def split_counts(n_per_class, split_fraction):
    n_test = int(round(n_per_class * (1.0 - split_fraction)))
    n_train = n_per_class - n_test
    if n_test < 1:
        raise InvalidInputException("split {} of {} samples per class leaves an empty test set".format(
            split_fraction, n_per_class))
    if n_train < 1:
        raise InvalidInputException("split {} of {} samples per class leaves an empty train set".format(
            split_fraction, n_per_class))
    return n_train, n_test


def generate_dataset(config: PhantomConfig, n_per_class, split_fraction=0.8):
    """
    Monta o manifesto de um conjunto balanceado com divisão estratificada.

    Cada fantoma é um "sujeito"; a divisão treino/teste é feita por amostra,
    com o mesmo número de amostras de teste em cada classe.

    Returns:
        Lista de ManifestRecord (caminhos relativos à pasta de configuração)
    """
    if n_per_class < 5:
        raise InvalidInputException("n_per_class must be at least 5, got {}".format(n_per_class))
    n_train, n_test = split_counts(n_per_class, split_fraction)
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed) & 0xFFFFFFFFFFFFFFFF, 0x5B1]))
    records = []
    for label in (ClassLabel.CN, ClassLabel.AD):
        test_indices = set(int(i) for i in rng.permutation(n_per_class)[:n_test])
        for index in range(n_per_class):
            sid = sample_id(config.seed, label, index)
            split = "test" if index in test_indices else "train"
            records.append(ManifestRecord(sid, label, os.path.join("phantoms", sid + ".npz"), split))
    logger.info("Dataset of %d samples per class (%d train / %d test per class)", n_per_class, n_train, n_test)
    return records


def save_phantom(path, phantom: Phantom, sample_index=None):
    payload = dict(pixels=phantom.slice.pixels, label=np.array(int(phantom.label)),
                   index=np.array(-1 if sample_index is None else int(sample_index)))
    for name in ("brain", "hippocampus", "ventricles", "surface", "interior"):
        payload[name] = getattr(phantom.masks, name)
    with atomic_write(path, binary=True) as handle:
        np.savez_compressed(handle, **payload)


def load_phantom(path) -> Phantom:
    try:
        with np.load(path) as data:
            masks = RegionMasks(**{name: data[name] for name in ("brain", "hippocampus", "ventricles", "surface",
                                                                  "interior")})
            return Phantom(SliceImage(data["pixels"]), masks, ClassLabel(int(data["label"])))
    except (OSError, KeyError, ValueError) as e:
        raise FormatException("Cannot read phantom {}: {}".format(path, e))


"""
================================================================================
CONTROLLER: PhantomController
================================================================================
Gera fantomas e grava o conjunto de dados na pasta de configuração.

Estrutura gravada:
- phantoms/<sample_id>.npz (fatia + máscaras)
- phantoms/manifest.yaml (manifesto com checksum)
"""
class PhantomController:

    def __init__(self, neuroaps):
        """
        Args:
            neuroaps: instância principal do NeuroAps
        """
        self.neuroaps = neuroaps
        self.logger = logging.getLogger(__name__)

    def config(self, **overrides) -> PhantomConfig:
        static = dict(self.neuroaps.static_config["phantom"])
        for key in ("count_per_class", "split_fraction"):
            static.pop(key, None)
        static.update({k: v for k, v in overrides.items() if v is not None})
        return PhantomConfig(**{k: v for k, v in static.items() if k in PhantomConfig.__dataclass_fields__})

    def generate(self, count_per_class=None, size=None, seed=None, out_dir=None):
        """
        Gera e grava todos os fantomas e o manifesto.

        Returns:
            Caminho do manifesto gravado
        """
        from neuroaps.utils.manifest import write_manifest

        static = self.neuroaps.static_config["phantom"]
        count_per_class = count_per_class or static["count_per_class"]
        config = self.config(image_size=size, seed=seed)
        out_dir = out_dir or self.neuroaps.config_folder.get_file_path("phantoms")
        os.makedirs(out_dir, exist_ok=True)
        records = generate_dataset(config, count_per_class, static["split_fraction"])
        written = []
        for record in records:
            index = int(record.sample_id.split("-")[1])
            phantom = generate_phantom(config, record.label, index)
            problems = phantom.masks.check()
            if problems:
                raise InvalidInputException("phantom {} violates mask invariants: {}".format(record.sample_id,
                                                                                            problems))
            filename = os.path.basename(record.path)
            save_phantom(os.path.join(out_dir, filename), phantom, index)
            written.append(ManifestRecord(record.sample_id, record.label, filename, record.split))
        manifest_path = os.path.join(out_dir, "manifest.yaml")
        write_manifest(manifest_path, written)
        self.logger.info("Wrote %d phantoms to %s", len(written), out_dir)
        return manifest_path
