import json
import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from neuroaps.api.dataclasses import N_REGIONS, ModelConfig, PointCloud
from neuroaps.api.exceptions import FormatException, LengthException, ShapeException
from neuroaps.autodiff import (Tape, concat, linear, masked_max_pool, matmul, relu, replace_rows,
                               scaled_dot_attention, take_rows)
from neuroaps.utils.utils import atomic_write

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"NAPS"
CHECKPOINT_VERSION = 1
_CHECKPOINT_HEADER = struct.Struct("<4sII")


def parameter_shapes(config: ModelConfig):
    """Formas dos parâmetros na ordem de declaração."""
    shapes = OrderedDict()
    fan_in = config.input_dim
    for i, dim in enumerate(config.encoder_dims):
        shapes["enc{}_w".format(i)] = (fan_in, dim)
        shapes["enc{}_b".format(i)] = (dim,)
        fan_in = dim
    for name in ("att_q", "att_k", "att_v"):
        shapes[name] = (config.fusion_dim, config.fusion_dim)
    shapes["empty_token"] = (config.fusion_dim,)
    for i in range(len(config.head_dims) - 1):
        shapes["head{}_w".format(i)] = (config.head_dims[i], config.head_dims[i + 1])
        shapes["head{}_b".format(i)] = (config.head_dims[i + 1],)
    return shapes


@dataclass(frozen=True, eq=False)
class ModelParams:
    """
    Pesos do NeuroAPS-Net, em ordem de declaração.

    Os arrays são somente leitura: um passo do otimizador produz um novo
    ModelParams, e snapshots podem ser passados entre threads.
    """
    config: ModelConfig
    arrays: "OrderedDict[str, np.ndarray]"

    def __post_init__(self):
        shapes = parameter_shapes(self.config)
        if list(self.arrays) != list(shapes):
            raise ShapeException("parameter names {} do not match {}".format(list(self.arrays), list(shapes)))
        frozen = OrderedDict()
        for name, shape in shapes.items():
            array = np.array(self.arrays[name], dtype=self.config.dtype, copy=True)
            if array.shape != shape:
                raise ShapeException("{} has shape {}, expected {}".format(name, array.shape, shape))
            if not np.isfinite(array).all():
                raise ShapeException("{} contains non-finite values".format(name))
            array.setflags(write=False)
            frozen[name] = array
        object.__setattr__(self, "arrays", frozen)

    def __getitem__(self, name):
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays)

    def items(self):
        return self.arrays.items()

    @property
    def nbytes(self):
        return sum(a.nbytes for a in self.arrays.values())

    def replace(self, arrays):
        return ModelParams(self.config, OrderedDict((name, arrays[name]) for name in self.arrays))

    def equals(self, other):
        return (self.config == other.config
                and all(np.array_equal(a, other.arrays[name]) for name, a in self.arrays.items()))


def init_params(config: ModelConfig) -> ModelParams:
    """
    Inicialização Xavier uniforme nos pesos; vieses e token vazio em zero.
    """
    rng = np.random.default_rng(config.init_seed)
    arrays = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if len(shape) == 2:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            arrays[name] = rng.uniform(-bound, bound, size=shape)
        else:
            arrays[name] = np.zeros(shape)
    return ModelParams(config, arrays)


def xavier_bound(shape):
    return float(np.sqrt(6.0 / (shape[0] + shape[1])))


def count_parameters(params) -> int:
    if isinstance(params, ModelConfig):
        return int(sum(np.prod(shape) for shape in parameter_shapes(params).values()))
    return int(sum(a.size for _, a in params.items()))


def flop_count(config: ModelConfig, n_points):
    """
    Contagem analítica de operações de ponto flutuante por nuvem.

    Cada camada densa conta 2·in·out (multiplicação e soma) mais 2·out por
    ponto (viés e ReLU). O pooling conta uma comparação por ponto e canal
    para os tokens de região e outra para o token global.
    """
    encoder = 0
    fan_in = config.input_dim
    for dim in config.encoder_dims:
        encoder += n_points * (2 * fan_in * dim + 2 * dim)
        fan_in = dim
    pooling = 2 * n_points * config.encoder_dims[-1]
    d, g = config.fusion_dim, N_REGIONS
    fusion = 2 * d * d + 2 * (2 * g * d * d) + 2 * g * d + 3 * g + 2 * g * d
    head = 0
    for i in range(len(config.head_dims) - 1):
        head += 2 * config.head_dims[i] * config.head_dims[i + 1] + 2 * config.head_dims[i + 1]
    return OrderedDict(encoder=encoder, pooling=pooling, fusion=fusion, head=head,
                       total=encoder + pooling + fusion + head)


def embed_points(cloud: PointCloud):
    """[x, y, I, one_hot(r)] por ponto: matriz N x 7 em float64."""
    features = np.zeros((len(cloud), 3 + N_REGIONS), dtype=np.float64)
    features[:, 0] = cloud.x
    features[:, 1] = cloud.y
    features[:, 2] = cloud.intensity
    features[np.arange(len(cloud)), 3 + cloud.region.astype(np.int64)] = 1.0
    return features


def bind(params: ModelParams, tape: Tape):
    return OrderedDict((name, tape.watch(array, name)) for name, array in params.items())


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    attention: np.ndarray
    empty_regions: np.ndarray
    peak_live_bytes: int = 0


def encode_points(points, weights, n_layers):
    features = points
    for i in range(n_layers):
        features = relu(linear(features, weights["enc{}_w".format(i)], weights["enc{}_b".format(i)]))
    return features


def roi_tokenize(features, regions, weights, n_clouds=1, n_points=None):
    """
    Tokens por região (max pooling) e token global.

    Regiões sem pontos recebem o token vazio aprendido.

    Returns:
        (roi_tokens [B*4 x D], global_tokens [B x D], máscara de regiões vazias [B x 4])
    """
    n_points = n_points or features.shape[0] // n_clouds
    cloud_ids = np.repeat(np.arange(n_clouds), n_points)
    roi_ids = cloud_ids * N_REGIONS + np.asarray(regions, dtype=np.int64).reshape(-1)
    pooled = masked_max_pool(features, roi_ids, n_clouds * N_REGIONS)
    roi_tokens = replace_rows(pooled.tokens, pooled.empty, weights["empty_token"])
    global_tokens = masked_max_pool(features, cloud_ids, n_clouds).tokens
    return roi_tokens, global_tokens, pooled.empty.reshape(n_clouds, N_REGIONS)


def fuse(roi_tokens, global_tokens, weights, n_clouds=1):
    """
    Atenção de consulta única do token global sobre os tokens de região,
    concatenada ao token global.

    Returns:
        (fundido [B x 2D], pesos de atenção [B x 4])
    """
    queries = matmul(global_tokens, weights["att_q"])
    keys = matmul(roi_tokens, weights["att_k"])
    values = matmul(roi_tokens, weights["att_v"])
    aggregated, attention = [], []
    for b in range(n_clouds):
        rows = np.arange(b * N_REGIONS, (b + 1) * N_REGIONS)
        out, w = scaled_dot_attention(take_rows(queries, [b]), take_rows(keys, rows), take_rows(values, rows))
        aggregated.append(out)
        attention.append(w)
    aggregated = aggregated[0] if n_clouds == 1 else concat(aggregated, axis=0)
    return concat([aggregated, global_tokens], axis=1), np.stack(attention)


def forward_batch(clouds, params: ModelParams, tape: Tape = None):
    """
    Forward do NeuroAPS-Net para um lote de nuvens do mesmo tamanho.

    Returns:
        (logits Tensor [B x 2], ForwardTrace)
    """
    tape = tape or Tape(params.config.dtype, record=False)
    logits, trace = apply_network(bind(params, tape), clouds, params.config)
    return logits, trace


def apply_network(weights, clouds, config: ModelConfig):
    """
    Mesmo forward de forward_batch, sobre tensores de peso já ligados a uma
    fita (usado pela verificação de gradiente).
    """
    if len(config.head_dims) < 2:
        raise ShapeException("model has no classification head")
    clouds = list(clouds)
    if not clouds:
        raise ShapeException("forward needs at least one cloud")
    n_points = len(clouds[0])
    if n_points < 1 or any(len(c) != n_points for c in clouds):
        raise ShapeException("all clouds in a batch need the same positive size")
    tape = next(iter(weights.values())).tape
    points = tape.constant(np.concatenate([embed_points(c) for c in clouds]))
    regions = np.concatenate([c.region for c in clouds])

    features = encode_points(points, weights, len(config.encoder_dims))
    roi_tokens, global_tokens, empty = roi_tokenize(features, regions, weights, len(clouds), n_points)
    fused, attention = fuse(roi_tokens, global_tokens, weights, len(clouds))

    hidden = fused
    n_head = len(config.head_dims) - 1
    for i in range(n_head):
        hidden = linear(hidden, weights["head{}_w".format(i)], weights["head{}_b".format(i)])
        if i < n_head - 1:
            hidden = relu(hidden)
    return hidden, ForwardTrace(attention, empty, tape.peak_live_bytes)


def forward(cloud: PointCloud, params: ModelParams, tape: Tape = None):
    """Logits [2] de uma única nuvem."""
    logits, _ = forward_batch([cloud], params, tape)
    return take_rows(logits, 0)


def predict(clouds, params: ModelParams):
    logits, trace = forward_batch(clouds, params)
    return logits.data.argmax(axis=1), trace


def encode_checkpoint(params: ModelParams) -> bytes:
    """
    Formato NAPS: "NAPS", u32 versão, u32 tamanho do bloco de configuração,
    bloco JSON e os buffers f32 little-endian na ordem de declaração.
    """
    block = dict(config=params.config.to_dict(),
                 params=[[name, list(array.shape)] for name, array in params.items()])
    config_bytes = json.dumps(block, sort_keys=True).encode("utf-8")
    buffers = b"".join(np.ascontiguousarray(array, dtype="<f4").tobytes() for _, array in params.items())
    return _CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(config_bytes)) + config_bytes + buffers


def decode_checkpoint(data) -> ModelParams:
    data = bytes(data)
    if len(data) < _CHECKPOINT_HEADER.size:
        raise LengthException("checkpoint shorter than its header")
    magic, version, length = _CHECKPOINT_HEADER.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatException("bad checkpoint magic {!r}, expected {!r}".format(magic, CHECKPOINT_MAGIC))
    if version != CHECKPOINT_VERSION:
        raise FormatException("unsupported checkpoint version {}".format(version))
    offset = _CHECKPOINT_HEADER.size
    if len(data) < offset + length:
        raise LengthException("checkpoint config block truncated")
    try:
        block = json.loads(data[offset:offset + length].decode("utf-8"))
        config = ModelConfig(**dict(block["config"], encoder_dims=tuple(block["config"]["encoder_dims"]),
                                    head_dims=tuple(block["config"]["head_dims"])))
    except (ValueError, KeyError, TypeError) as e:
        raise FormatException("malformed checkpoint config block: {}".format(e))
    offset += length
    shapes = parameter_shapes(config)
    if [[n, list(s)] for n, s in shapes.items()] != block.get("params"):
        raise FormatException("checkpoint parameter table does not match its config")
    expected = offset + 4 * sum(int(np.prod(s)) for s in shapes.values())
    if len(data) != expected:
        raise LengthException("checkpoint has {} bytes, expected {}".format(len(data), expected))
    arrays = OrderedDict()
    for name, shape in shapes.items():
        size = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f4", count=size, offset=offset).reshape(shape)
        offset += 4 * size
    return ModelParams(config, arrays)


"""
================================================================================
CONTROLLER: ModelController
================================================================================
Cria, grava e carrega os parâmetros do NeuroAPS-Net a partir da seção
`model` do config.yaml.
"""
class ModelController:

    def __init__(self, neuroaps):
        self.neuroaps = neuroaps
        self.logger = logging.getLogger(__name__)

    def config(self, **overrides) -> ModelConfig:
        static = dict(self.neuroaps.static_config["model"])
        static.update({k: v for k, v in overrides.items() if v is not None})
        return ModelConfig(encoder_dims=tuple(static["encoder_dims"]), fusion_dim=static["fusion_dim"],
                           head_dims=tuple(static["head_dims"]), init_seed=static["init_seed"],
                           dtype=static["dtype"])

    def init(self, **overrides) -> ModelParams:
        params = init_params(self.config(**overrides))
        self.logger.info("Initialized NeuroAPS-Net with %d parameters", count_parameters(params))
        return params

    def save(self, path, params: ModelParams):
        with atomic_write(path, binary=True) as f:
            f.write(encode_checkpoint(params))
        self.logger.info("Checkpoint written to %s", path)

    def load(self, path) -> ModelParams:
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as e:
            raise FormatException("cannot read checkpoint {}: {}".format(path, e))
        return decode_checkpoint(data)
