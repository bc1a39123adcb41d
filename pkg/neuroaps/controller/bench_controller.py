import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager

import numpy as np
import psutil

from neuroaps.api.dataclasses import (DEFAULT_RATIOS, ClassLabel, LatencyResult, PhantomConfig, RunReport, RunRow,
                                      SamplerKind, SamplingBudget)
from neuroaps.api.exceptions import UsageException
from neuroaps.autodiff import AdamState, Tape, cross_entropy
from neuroaps.controller.model_controller import ModelParams, apply_network, bind, forward_batch
from neuroaps.controller.phantom_controller import generate_phantom, load_phantom
from neuroaps.controller.sampler_controller import aps_sample, sample_cloud
from neuroaps.controller.trainer_controller import evaluate, train
from neuroaps.utils.manifest import load_manifest

logger = logging.getLogger(__name__)

MIN_WARMUP = 3
MIN_REPS = 20


@contextmanager
def pinned_cpu():
    """Fixa o processo em um único núcleo lógico enquanto mede, quando a plataforma permite."""
    process = psutil.Process()
    previous = None
    try:
        previous = process.cpu_affinity()
        process.cpu_affinity(previous[:1])
    except (AttributeError, NotImplementedError, psutil.Error, OSError, ValueError):
        previous = None
    try:
        yield
    finally:
        if previous is not None:
            try:
                process.cpu_affinity(previous)
            except (psutil.Error, OSError, ValueError) as e:
                logger.warning("Cannot restore CPU affinity: %s", e)


def reference_cloud(n_points, seed=0):
    """Nuvem APS fixa sobre um fantoma padrão, usada para medir latência."""
    phantom = generate_phantom(PhantomConfig(seed=seed), ClassLabel.CN, 0)
    return aps_sample(phantom.slice, phantom.masks, SamplingBudget(DEFAULT_RATIOS, n_points), seed)


def measure_latency(params: ModelParams, n_points=None, warmup=5, reps=50, cloud=None) -> LatencyResult:
    """
    Latência de um forward de uma única nuvem.

    Executa `warmup` forwards sem medir e depois `reps` forwards medidos,
    sempre sobre a mesma nuvem. Reporta a mediana, com mínimo e máximo como
    dados auxiliares.
    """
    if warmup < MIN_WARMUP:
        raise UsageException("warmup must be at least {}, got {}".format(MIN_WARMUP, warmup))
    if reps < MIN_REPS:
        raise UsageException("reps must be at least {}, got {}".format(MIN_REPS, reps))
    if cloud is None:
        cloud = reference_cloud(n_points)
    samples = []
    with pinned_cpu():
        for _ in range(warmup):
            forward_batch([cloud], params)
        for _ in range(reps):
            start = time.perf_counter()
            forward_batch([cloud], params)
            samples.append((time.perf_counter() - start) * 1000.0)
    return LatencyResult(float(np.median(samples)), float(np.min(samples)), float(np.max(samples)), tuple(samples))


def workspace_bytes(params: ModelParams, cloud) -> int:
    """
    Marca d'água de bytes vivos de um passo de treino sobre uma nuvem.

    Conta os momentos do Adam, os parâmetros, as ativações de um forward
    gravado e os gradientes do backward. Nuvens sem rótulo usam a classe CN
    como alvo; o valor da perda não altera os bytes.
    """
    state = AdamState(m={name: np.zeros_like(a) for name, a in params.items()},
                      v={name: np.zeros_like(a) for name, a in params.items()})
    tape = Tape(params.config.dtype)
    tape.account(state.nbytes)
    logits, _ = apply_network(bind(params, tape), [cloud], params.config)
    target = int(ClassLabel.CN) if cloud.class_label is None else int(cloud.class_label)
    tape.backward(cross_entropy(logits, np.array([target])))
    return tape.peak_live_bytes


def measure_sampling(kind, phantom, n_points, seed=0, reps=5):
    """Mediana, em ms, do tempo de amostragem de uma nuvem."""
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        sample_cloud(kind, phantom.slice, phantom.masks, n_points, seed)
        samples.append((time.perf_counter() - start) * 1000.0)
    return float(np.median(samples))


def density_cells(point_counts, seeds):
    return [(SamplerKind.APS, int(n), int(s)) for n in point_counts for s in seeds]


def ablation_cells(seeds, n_points=8192):
    return [(kind, int(n_points), int(s)) for kind in SamplerKind for s in seeds]


def _train_cell(config_folder_path, cloud_manifest, seed):
    from neuroaps.neuroaps import NeuroAps

    app = NeuroAps(config_folder_path)
    train_set, test_set, _ = app.trainer.split(cloud_manifest)
    params, _ = train(train_set, test_set, app.model.config(init_seed=seed), app.trainer.config(seed=seed))
    return params, evaluate(params, test_set).accuracy


"""
================================================================================
CONTROLLER: BenchController
================================================================================
Varreduras de densidade de pontos e de ablação dos amostradores.

Cada célula (variante, pontos, semente) treina um modelo, avalia no split de
teste e mede latência, workspace e tempo de amostragem. Com workers > 1 o
treino das células roda em processos separados; as medições de tempo ficam
sempre no processo principal, uma de cada vez.
"""
class BenchController:

    def __init__(self, neuroaps):
        self.neuroaps = neuroaps
        self.logger = logging.getLogger(__name__)

    @property
    def static(self):
        return self.neuroaps.static_config["bench"]

    def bench_checkpoint(self, params: ModelParams, n_points, warmup=None, reps=None):
        warmup = self.static["warmup"] if warmup is None else warmup
        reps = self.static["reps"] if reps is None else reps
        cloud = reference_cloud(n_points)
        latency = measure_latency(params, n_points, warmup, reps, cloud)
        return dict(n_points=int(n_points), latency_ms=latency.median_ms, latency_min_ms=latency.min_ms,
                    latency_max_ms=latency.max_ms, peak_workspace_bytes=workspace_bytes(params, cloud))

    def run(self, phantom_manifest, cells, warmup=None, reps=None, workers=None) -> RunReport:
        warmup = self.static["warmup"] if warmup is None else warmup
        reps = self.static["reps"] if reps is None else reps
        workers = self.static["workers"] if workers is None else workers

        cloud_manifests = {}
        for kind, n_points, _ in cells:
            if (kind, n_points) not in cloud_manifests:
                cloud_manifests[(kind, n_points)] = self.neuroaps.sampler.ensure_clouds(phantom_manifest, kind,
                                                                                       n_points)
        folder = self.neuroaps.config_folder.path
        jobs = [(folder, cloud_manifests[(kind, n)], seed) for kind, n, seed in cells]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                trained = list(pool.map(_train_cell, *zip(*jobs)))
        else:
            trained = [_train_cell(*job) for job in jobs]

        records, _ = load_manifest(phantom_manifest)
        base = os.path.dirname(os.path.abspath(phantom_manifest))
        phantom = self.neuroaps.preprocess.prepare(load_phantom(os.path.join(base, records[0].path)))

        report = RunReport()
        for (kind, n_points, seed), (params, accuracy), job in zip(cells, trained, jobs):
            _, test_set, _ = self.neuroaps.trainer.split(job[1])
            cloud = test_set[0]
            latency = measure_latency(params, n_points, warmup, reps, cloud)
            row = RunRow(kind, n_points, seed, accuracy, latency.median_ms, workspace_bytes(params, cloud),
                         measure_sampling(kind, phantom, n_points, seed))
            report.add(row)
            self.logger.info("%s n=%d seed=%d accuracy=%.3f latency=%.3fms workspace=%d sampling=%.3fms", kind,
                             n_points, seed, row.accuracy, row.latency_ms, row.peak_workspace_bytes, row.sampling_ms)
        return report.sorted()

    def density_sweep(self, phantom_manifest, point_counts=None, seeds=None, **kwargs) -> RunReport:
        point_counts = point_counts or self.static["point_counts"]
        seeds = self.static["seeds"] if seeds is None else seeds
        return self.run(phantom_manifest, density_cells(point_counts, seeds), **kwargs)

    def ablation_sweep(self, phantom_manifest, seeds=None, n_points=None, **kwargs) -> RunReport:
        seeds = self.static["seeds"] if seeds is None else seeds
        n_points = n_points or self.static["ablation_points"]
        return self.run(phantom_manifest, ablation_cells(seeds, n_points), **kwargs)
