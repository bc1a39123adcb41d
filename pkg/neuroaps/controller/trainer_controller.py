import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from neuroaps.api.dataclasses import (N_REGIONS, ClassLabel, EvaluationResult, ModelConfig, PointCloud,
                                      TrainConfig)
from neuroaps.api.exceptions import InvalidInputException, NumericalException
from neuroaps.autodiff import AdamState, Tape, adam_step, cross_entropy
from neuroaps.controller.model_controller import ModelParams, apply_network, bind, init_params, predict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float

    def to_dict(self):
        return dict(epoch=self.epoch, train_loss=self.train_loss, train_acc=self.train_acc, test_acc=self.test_acc)


def augment(cloud: PointCloud, config: TrainConfig, rng) -> PointCloud:
    """
    Jitter gaussiano nas coordenadas (limitado a [-1, 1]) seguido de
    dropout por substituição: floor(fração·N) pontos viram cópias de pontos
    sobreviventes, mantendo o tamanho da nuvem.
    """
    n = len(cloud)
    x = np.asarray(cloud.x, dtype=np.float64)
    y = np.asarray(cloud.y, dtype=np.float64)
    if config.jitter_sigma > 0:
        x = np.clip(x + rng.normal(0.0, config.jitter_sigma, size=n), -1.0, 1.0)
        y = np.clip(y + rng.normal(0.0, config.jitter_sigma, size=n), -1.0, 1.0)
    intensity = cloud.intensity
    region = cloud.region
    n_drop = int(math.floor(config.dropout_fraction * n))
    if 0 < n_drop < n:
        dropped = rng.choice(n, size=n_drop, replace=False)
        survivors = np.setdiff1d(np.arange(n), dropped)
        source = survivors[rng.integers(0, len(survivors), size=n_drop)]
        x, y = x.copy(), y.copy()
        intensity, region = intensity.copy(), region.copy()
        for column in (x, y, intensity, region):
            column[dropped] = column[source]
    return cloud.with_columns(x=x, y=y, intensity=intensity, region=region)


def _targets(clouds):
    targets = []
    for cloud in clouds:
        if cloud.class_label is None:
            raise InvalidInputException("cloud {} has no class label".format(cloud.source_id))
        targets.append(int(cloud.class_label))
    return np.asarray(targets, dtype=np.int64)


def _chunks(items, size):
    return [items[i:i + size] for i in range(0, len(items), size)]


def evaluate(params: ModelParams, clouds, batch_size=16, workers=1, return_attention=False):
    """
    Acurácia e matriz de confusão (AD é a classe positiva).

    Com workers > 1 os lotes são avaliados em threads sobre o mesmo snapshot
    imutável dos parâmetros.

    Returns:
        EvaluationResult, ou (EvaluationResult, atenção média por região) com
        return_attention=True
    """
    clouds = list(clouds)
    if not clouds:
        raise InvalidInputException("cannot evaluate an empty split")
    targets = _targets(clouds)
    chunks = _chunks(clouds, batch_size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(lambda chunk: predict(chunk, params), chunks))
    else:
        outputs = [predict(chunk, params) for chunk in chunks]
    predicted = np.concatenate([p for p, _ in outputs])
    positive = int(ClassLabel.AD)
    result = EvaluationResult(tp=int(np.sum((predicted == positive) & (targets == positive))),
                              tn=int(np.sum((predicted != positive) & (targets != positive))),
                              fp=int(np.sum((predicted == positive) & (targets != positive))),
                              fn=int(np.sum((predicted != positive) & (targets == positive))))
    if not return_attention:
        return result
    attention = np.concatenate([trace.attention for _, trace in outputs])
    return result, attention.reshape(-1, N_REGIONS).mean(axis=0)


def train(train_clouds, test_clouds, model_config: ModelConfig, train_config: TrainConfig, params=None):
    """
    Treino ponta a ponta com entropia cruzada e Adam.

    Por época: embaralha (semente fixa), aumenta cada nuvem do lote, faz
    forward, backward e um passo do Adam. O histórico guarda a perda média
    de treino e as acurácias de treino e teste.

    Args:
        train_clouds: nuvens rotuladas de treino
        test_clouds: nuvens rotuladas de teste (pode ser vazio)
        model_config: ModelConfig
        train_config: TrainConfig
        params: parâmetros iniciais (padrão: init_params(model_config))

    Returns:
        (ModelParams finais, lista de EpochRecord)
    """
    train_clouds = list(train_clouds)
    test_clouds = list(test_clouds)
    if not train_clouds:
        raise InvalidInputException("train split is empty")
    targets = _targets(train_clouds)
    if params is None:
        params = init_params(model_config)
    state = AdamState(learning_rate=train_config.learning_rate)
    shuffle_stream, augment_stream = np.random.SeedSequence(int(train_config.seed) & 0xFFFFFFFFFFFFFFFF).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_stream)
    augment_rng = np.random.default_rng(augment_stream)

    history = []
    step = 0
    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(len(train_clouds))
        loss_sum = 0.0
        correct = 0
        for batch_index in _chunks(order, train_config.batch_size):
            batch = [augment(train_clouds[i], train_config, augment_rng) for i in batch_index]
            batch_targets = targets[batch_index]
            tape = Tape(model_config.dtype)
            weights = bind(params, tape)
            try:
                logits, _ = apply_network(weights, batch, model_config)
                loss = cross_entropy(logits, batch_targets)
                tape.backward(loss)
            except NumericalException as e:
                raise NumericalException("non-finite value at step {} (epoch {}), batch {}: {}".format(
                    step, epoch, [c.source_id for c in batch], e))
            grads = {name: tensor.grad for name, tensor in weights.items() if tensor.grad is not None}
            arrays, state = adam_step(dict(params.items()), grads, state)
            params = params.replace(arrays)
            loss_sum += loss.item() * len(batch_index)
            correct += int(np.sum(logits.data.argmax(axis=1) == batch_targets))
            step += 1
        train_loss = loss_sum / len(train_clouds)
        if not np.isfinite(train_loss):
            raise NumericalException("non-finite mean loss in epoch {}".format(epoch))
        test_acc = evaluate(params, test_clouds, train_config.batch_size).accuracy if test_clouds else float("nan")
        record = EpochRecord(epoch, train_loss, correct / len(train_clouds), test_acc)
        history.append(record)
        logger.info("epoch %d/%d loss=%.4f train_acc=%.3f test_acc=%.3f", epoch, train_config.epochs,
                    record.train_loss, record.train_acc, record.test_acc)
    return params, history


"""
================================================================================
CONTROLLER: TrainerController
================================================================================
Treina e avalia o NeuroAPS-Net sobre uma pasta de nuvens (manifesto APC1),
gravando checkpoint NAPS e histórico CSV.
"""
class TrainerController:

    def __init__(self, neuroaps):
        self.neuroaps = neuroaps
        self.logger = logging.getLogger(__name__)

    def config(self, **overrides) -> TrainConfig:
        static = dict(self.neuroaps.static_config["train"])
        static.update({k: v for k, v in overrides.items() if v is not None})
        return TrainConfig(**{k: v for k, v in static.items() if k in TrainConfig.__dataclass_fields__})

    def split(self, cloud_manifest):
        pairs, meta = self.neuroaps.sampler.load_clouds(cloud_manifest)
        train_set = [cloud for record, cloud in pairs if record.split == "train"]
        test_set = [cloud for record, cloud in pairs if record.split == "test"]
        return train_set, test_set, meta

    def fit(self, cloud_manifest, checkpoint_out=None, history_out=None, init_seed=None, **overrides):
        """
        Treina a partir de um manifesto de nuvens e grava os artefatos.

        Returns:
            (ModelParams, histórico)
        """
        from neuroaps.utils.report import write_history

        train_config = self.config(**overrides)
        model_config = self.neuroaps.model.config(init_seed=init_seed)
        train_set, test_set, meta = self.split(cloud_manifest)
        self.logger.info("Training on %d clouds (%d test) sampled with %s at %s points", len(train_set),
                         len(test_set), meta.get("sampler"), meta.get("n_points"))
        params, history = train(train_set, test_set, model_config, train_config)
        if checkpoint_out:
            self.neuroaps.model.save(checkpoint_out, params)
        if history_out:
            write_history(history_out, history, os.path.splitext(history_out)[0] + ".json")
        return params, history

    def evaluate(self, params, cloud_manifest, split="test", workers=1, return_attention=False):
        pairs, _ = self.neuroaps.sampler.load_clouds(cloud_manifest, split=split)
        return evaluate(params, [cloud for _, cloud in pairs], workers=workers, return_attention=return_attention)
