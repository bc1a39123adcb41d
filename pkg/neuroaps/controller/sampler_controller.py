import hashlib
import logging
import math
import os

import numpy as np
from scipy import ndimage

from neuroaps.api.cloud import normalize_coordinates, region_counts, validate_cloud
from neuroaps.api.dataclasses import (DEFAULT_RATIOS, N_REGIONS, ManifestRecord, PointCloud, RegionLabel,
                                      RegionMasks, SamplerKind, SamplingBudget, SliceImage)
from neuroaps.api.exceptions import (BudgetException, InvalidInputException, SamplingException,
                                     UsageException)
from neuroaps.controller.phantom_controller import load_phantom
from neuroaps.utils.cloud_codec import read_cloud, write_cloud
from neuroaps.utils.manifest import load_manifest, manifest_digest, write_manifest

logger = logging.getLogger(__name__)

CROSS = ndimage.generate_binary_structure(2, 1)


def allocate_budget(budget: SamplingBudget, availability):
    """
    Distribui total_n pontos entre as regiões.

    Regiões sem pixels ficam com zero e a cota delas é redistribuída
    proporcionalmente entre as demais. Cada região recebe floor(cota) e as
    sobras vão para as maiores partes fracionárias (empate: menor índice).

    Args:
        budget: SamplingBudget
        availability: contagem de pixels por região, na ordem de RegionLabel

    Returns:
        Tupla com a contagem de pontos por região (soma == total_n)
    """
    available = np.asarray(availability, dtype=np.int64).reshape(-1)
    if available.shape[0] != N_REGIONS:
        raise BudgetException("expected {} availability counts, got {}".format(N_REGIONS, available.shape[0]))
    if available.sum() < 1:
        raise BudgetException("all regions are empty")
    ratios = np.where(available > 0, np.asarray(budget.ratios, dtype=np.float64), 0.0)
    if ratios.sum() <= 0:
        # every region with a quota is empty: fall back to area proportions
        ratios = available / available.sum()
    quotas = ratios / ratios.sum() * budget.total_n
    counts = np.floor(quotas + 1e-9).astype(np.int64)
    remainder = int(budget.total_n - counts.sum())
    if remainder < 0:
        raise BudgetException("allocation overshoots total_n by {}".format(-remainder))
    fractions = quotas - counts
    eligible = [i for i in range(N_REGIONS) if ratios[i] > 0]
    for i in sorted(eligible, key=lambda i: (-fractions[i], i))[:remainder]:
        counts[i] += 1
    return tuple(int(c) for c in counts)


def extract_boundary(mask):
    """
    Pixels da máscara com pelo menos um vizinho-4 fora dela.

    Fora da imagem conta como fora da máscara.

    Returns:
        Array [K x 2] de (linha, coluna) em ordem de varredura por linhas
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise InvalidInputException("cannot extract the boundary of an empty mask")
    inner = ndimage.binary_erosion(mask, structure=CROSS, border_value=0)
    return np.argwhere(mask & ~inner)


def sample_region(candidates, count, rng):
    """
    Sorteia `count` pixels entre os candidatos.

    Sem reposição quando há candidatos suficientes; caso contrário usa todos
    os candidatos e completa o restante com reposição.
    """
    candidates = np.asarray(candidates, dtype=np.int64).reshape(-1, 2)
    if count < 0:
        raise SamplingException("negative sample count {}".format(count))
    if count == 0:
        return candidates[:0]
    if len(candidates) == 0:
        raise SamplingException("{} points requested from an empty candidate set".format(count))
    if count <= len(candidates):
        index = rng.permutation(len(candidates))[:count]
    else:
        index = np.concatenate([rng.permutation(len(candidates)),
                                rng.integers(0, len(candidates), size=count - len(candidates))])
    return candidates[index]


def region_candidates(masks: RegionMasks):
    ventricles = np.argwhere(masks.ventricles)
    if len(ventricles):
        ventricles = np.concatenate([ventricles, extract_boundary(masks.ventricles)])
    return {
        RegionLabel.HIPPOCAMPUS: np.argwhere(masks.hippocampus),
        RegionLabel.VENTRICLES: ventricles,
        RegionLabel.SURFACE: np.argwhere(masks.surface),
        RegionLabel.INTERIOR: np.argwhere(masks.interior),
    }


def _check_shapes(image: SliceImage, masks: RegionMasks):
    if masks.shape != image.pixels.shape:
        raise InvalidInputException("mask shape {} does not match slice shape {}".format(masks.shape,
                                                                                         image.pixels.shape))


def _build_cloud(image: SliceImage, masks: RegionMasks, pixels, regions, source_id=""):
    rows, cols = pixels[:, 0], pixels[:, 1]
    if not masks.brain[rows, cols].all():
        outside = int(np.count_nonzero(~masks.brain[rows, cols]))
        raise SamplingException("{} sampled points fall outside the brain mask".format(outside))
    x, y = normalize_coordinates(cols, rows, image.width, image.height)
    return PointCloud(x, y, image.pixels[rows, cols], regions, source_id=source_id)


def aps_sample(image: SliceImage, masks: RegionMasks, budget: SamplingBudget, seed, source_id="") -> PointCloud:
    """
    Amostragem por prioridade anatômica.

    Etapas: alocação do orçamento por região, sorteio por região (borda do
    cérebro para a superfície, máscara e borda para os ventrículos),
    rotulagem e corte rígido pela máscara do cérebro.
    """
    _check_shapes(image, masks)
    counts = allocate_budget(budget, masks.availability())
    candidates = region_candidates(masks)
    streams = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF).spawn(N_REGIONS)
    pixels, regions = [], []
    for region in RegionLabel:
        chosen = sample_region(candidates[region], counts[region], np.random.default_rng(streams[int(region)]))
        pixels.append(chosen)
        regions.append(np.full(len(chosen), int(region), dtype=np.uint8))
    cloud = _build_cloud(image, masks, np.concatenate(pixels), np.concatenate(regions), source_id)
    if region_counts(cloud) != counts:
        raise SamplingException("region counts {} differ from allocation {}".format(region_counts(cloud), counts))
    return cloud


def _grid(brain, stride):
    height, width = brain.shape
    rows = np.floor((np.arange(int(math.ceil(height / stride))) + 0.5) * stride).astype(np.int64)
    cols = np.floor((np.arange(int(math.ceil(width / stride))) + 0.5) * stride).astype(np.int64)
    rows = rows[rows < height]
    cols = cols[cols < width]
    inside = brain[np.ix_(rows, cols)]
    hits = np.argwhere(inside)
    return np.stack([rows[hits[:, 0]], cols[hits[:, 1]]], axis=1)


def uniform_grid(brain, total_n, iterations=50):
    """
    Grade regular sobre a máscara do cérebro com pelo menos total_n nós.

    O passo (real) é o maior encontrado por bisseção que ainda gera
    total_n nós dentro do cérebro; a grade é truncada nos primeiros total_n
    nós em ordem de varredura por linhas. Passos abaixo de 1 pixel repetem
    pixels quando o cérebro tem menos de total_n pixels.
    """
    brain = np.asarray(brain, dtype=bool)
    area = int(brain.sum())
    if area < 1:
        raise SamplingException("empty brain mask")
    lo = min(1.0, math.sqrt(area / total_n)) / 2.0
    while len(_grid(brain, lo)) < total_n:
        lo /= 2.0
    hi = float(max(brain.shape))
    if len(_grid(brain, hi)) >= total_n:
        lo = hi
    else:
        for _ in range(iterations):
            mid = (lo + hi) / 2.0
            if len(_grid(brain, mid)) >= total_n:
                lo = mid
            else:
                hi = mid
    return _grid(brain, lo)[:total_n]


def ablation_sample(kind, image: SliceImage, masks: RegionMasks, total_n, seed, source_id="") -> PointCloud:
    """
    Amostradores de ablação: grade uniforme ou sorteio i.i.d. sobre o cérebro.

    Variantes com ROI rotulam cada ponto pela máscara que o contém; variantes
    sem ROI rotulam tudo como interior.
    """
    kind = SamplerKind(kind)
    _check_shapes(image, masks)
    if total_n < 1:
        raise BudgetException("total_n must be positive, got {}".format(total_n))
    if kind == SamplerKind.APS:
        return aps_sample(image, masks, SamplingBudget(DEFAULT_RATIOS, total_n), seed, source_id)
    if kind in (SamplerKind.UNIFORM_ROI, SamplerKind.UNIFORM_NO_ROI):
        pixels = uniform_grid(masks.brain, total_n)
    else:
        brain_pixels = np.argwhere(masks.brain)
        if len(brain_pixels) == 0:
            raise SamplingException("empty brain mask")
        rng = np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF))
        pixels = brain_pixels[rng.integers(0, len(brain_pixels), size=total_n)]
    if kind.uses_roi:
        labels = masks.label_map()[pixels[:, 0], pixels[:, 1]]
        regions = np.where(labels < 0, int(RegionLabel.INTERIOR), labels).astype(np.uint8)
    else:
        regions = np.full(len(pixels), int(RegionLabel.INTERIOR), dtype=np.uint8)
    return _build_cloud(image, masks, pixels, regions, source_id)


def sample_cloud(kind, image, masks, total_n, seed, ratios=None, source_id=""):
    kind = SamplerKind(kind)
    if kind == SamplerKind.APS:
        return aps_sample(image, masks, SamplingBudget(ratios or DEFAULT_RATIOS, total_n), seed, source_id)
    if ratios is not None:
        raise UsageException("ratios only apply to the aps sampler, not {}".format(kind))
    return ablation_sample(kind, image, masks, total_n, seed, source_id)


def derived_seed(seed, sample_id):
    digest = hashlib.sha256("{}/{}".format(int(seed), sample_id).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


"""
================================================================================
CONTROLLER: SamplerController
================================================================================
Converte o conjunto de fantomas em nuvens APC1.

Estrutura gravada (por padrão):
- clouds/<sampler>/<n_points>/<sample_id>.apc
- clouds/<sampler>/<n_points>/manifest.yaml

O manifesto das nuvens guarda o amostrador, o número de pontos, a semente e
as proporções usadas; uma pasta cujo manifesto bate com o pedido é reusada
sem nova amostragem.
"""
class SamplerController:

    def __init__(self, neuroaps):
        self.neuroaps = neuroaps
        self.logger = logging.getLogger(__name__)

    def cloud_dir(self, kind, n_points):
        return self.neuroaps.config_folder.get_file_path(os.path.join("clouds", str(SamplerKind(kind)),
                                                                      str(int(n_points))))

    def sample(self, manifest_path, kind, n_points, seed=None, ratios=None, out_dir=None, svg=False):
        """
        Amostra todas as entradas de um manifesto de fantomas.

        Args:
            manifest_path: manifesto gerado por gen-phantom
            kind: SamplerKind ou nome do amostrador
            n_points: tamanho das nuvens
            seed: semente base (padrão: seção sampling do config)
            ratios: proporções por região (somente aps)
            out_dir: pasta de saída (padrão: clouds/<sampler>/<n_points>)
            svg: grava também um gráfico de dispersão por nuvem

        Returns:
            Caminho do manifesto das nuvens
        """
        kind = SamplerKind(kind)
        seed = self.neuroaps.static_config["sampling"]["seed"] if seed is None else seed
        if kind == SamplerKind.APS and ratios is None:
            ratios = tuple(self.neuroaps.static_config["sampling"]["ratios"])
        elif kind != SamplerKind.APS and ratios is not None:
            raise UsageException("--ratios only applies to the aps sampler, not {}".format(kind))
        if kind == SamplerKind.APS:
            SamplingBudget(ratios, n_points)
        out_dir = out_dir or self.cloud_dir(kind, n_points)

        records, _ = load_manifest(manifest_path)
        base = os.path.dirname(os.path.abspath(manifest_path))
        written = []
        totals = np.zeros(N_REGIONS, dtype=np.int64)
        for record in records:
            phantom = self.neuroaps.preprocess.prepare(load_phantom(os.path.join(base, record.path)))
            cloud = sample_cloud(kind, phantom.slice, phantom.masks, n_points, derived_seed(seed, record.sample_id),
                                 ratios if kind == SamplerKind.APS else None, record.sample_id)
            cloud = PointCloud(cloud.x, cloud.y, cloud.intensity, cloud.region, record.label, record.sample_id)
            result = validate_cloud(cloud, n_points)
            if not result.ok:
                raise SamplingException("cloud {} violates {}".format(record.sample_id, result.violations[0]))
            counts = region_counts(cloud)
            totals += counts
            self.logger.debug("%s %s region counts %s", kind, record.sample_id,
                              dict(zip((str(r) for r in RegionLabel), counts)))
            filename = record.sample_id + ".apc"
            write_cloud(os.path.join(out_dir, filename), cloud)
            if svg:
                from neuroaps.utils.svg import render_cloud_svg, write_svg
                write_svg(os.path.join(out_dir, record.sample_id + ".svg"), render_cloud_svg(cloud))
            written.append(ManifestRecord(record.sample_id, record.label, filename, record.split))

        meta = dict(sampler=str(kind), n_points=int(n_points), seed=int(seed),
                    ratios=[float(r) for r in ratios] if ratios is not None else None,
                    source=os.path.abspath(manifest_path), source_sha256=manifest_digest(manifest_path))
        cloud_manifest = os.path.join(out_dir, "manifest.yaml")
        write_manifest(cloud_manifest, written, meta)
        self.logger.info("Sampled %d clouds with %s at %d points into %s (region totals %s)", len(written), kind,
                         n_points, out_dir, dict(zip((str(r) for r in RegionLabel), totals.tolist())))
        return cloud_manifest

    def ensure_clouds(self, manifest_path, kind, n_points, seed=None):
        """Reusa a pasta de nuvens em cache quando o manifesto bate com o pedido."""
        kind = SamplerKind(kind)
        seed = self.neuroaps.static_config["sampling"]["seed"] if seed is None else seed
        out_dir = self.cloud_dir(kind, n_points)
        cached = os.path.join(out_dir, "manifest.yaml")
        if os.path.exists(cached):
            _, meta = load_manifest(cached)
            ratios = list(self.neuroaps.static_config["sampling"]["ratios"]) if kind == SamplerKind.APS else None
            if (meta.get("sampler") == str(kind) and meta.get("n_points") == int(n_points)
                    and meta.get("seed") == int(seed) and meta.get("ratios") == ratios
                    and meta.get("source") == os.path.abspath(manifest_path)
                    and meta.get("source_sha256") == manifest_digest(manifest_path)):
                self.logger.debug("Reusing cached clouds in %s", out_dir)
                return cached
        return self.sample(manifest_path, kind, n_points, seed, out_dir=out_dir)

    def load_clouds(self, cloud_manifest, split=None):
        """
        Returns:
            (lista de (ManifestRecord, PointCloud), dicionário meta)
        """
        records, meta = load_manifest(cloud_manifest)
        base = os.path.dirname(os.path.abspath(cloud_manifest))
        result = []
        for record in records:
            if split is not None and record.split != split:
                continue
            cloud = read_cloud(os.path.join(base, record.path), record.sample_id)
            if cloud.class_label is None:
                cloud = PointCloud(cloud.x, cloud.y, cloud.intensity, cloud.region, record.label, record.sample_id)
            result.append((record, cloud))
        return result, meta
