from collections import namedtuple

import numpy as np

from neuroaps.api.exceptions import InvalidInputException, ShapeException
from neuroaps.autodiff._tensor import tape_of

__all__ = ["matmul", "add_bias", "linear", "relu", "masked_max_pool", "softmax", "scaled_dot_attention",
           "cross_entropy", "concat", "take_rows", "replace_rows", "reduce_sum", "PoolResult"]

"""
================================================================================
PRIMITIVAS: Operações Diferenciáveis
================================================================================
Somente as primitivas usadas pelo NeuroAPS-Net:
- matmul, add_bias, relu (MLP compartilhado)
- masked_max_pool (tokens por região e token global)
- softmax, scaled_dot_attention (fusão por atenção)
- cross_entropy (objetivo de treino)
- concat, take_rows, replace_rows, reduce_sum (costura entre estágios)

Cada função calcula o forward com numpy e registra na fita uma função de
backward que devolve um gradiente por entrada.
"""

PoolResult = namedtuple("PoolResult", ["tokens", "argmax", "empty"])


def _require_2d(name, tensor):
    if tensor.data.ndim != 2:
        raise ShapeException("{} expects a 2D tensor, got shape {}".format(name, tensor.shape))


def matmul(a, b):
    _require_2d("matmul", a)
    _require_2d("matmul", b)
    if a.shape[1] != b.shape[0]:
        raise ShapeException("matmul shape mismatch {} x {}".format(a.shape, b.shape))
    tape = tape_of(a, b)
    a_data, b_data = a.data, b.data

    def backward(grad):
        return grad @ b_data.T, a_data.T @ grad

    return tape.record_op("matmul", (a, b), a_data @ b_data, backward)


def add_bias(a, bias):
    _require_2d("add_bias", a)
    if bias.data.ndim != 1 or bias.shape[0] != a.shape[1]:
        raise ShapeException("add_bias shape mismatch {} + {}".format(a.shape, bias.shape))
    tape = tape_of(a, bias)

    def backward(grad):
        return grad, grad.sum(axis=0)

    return tape.record_op("add_bias", (a, bias), a.data + bias.data, backward)


def linear(x, weight, bias):
    return add_bias(matmul(x, weight), bias)


def relu(a):
    tape = tape_of(a)
    positive = a.data > 0
    tape.note_branch(np.packbits(positive))

    def backward(grad):
        return (grad * positive,)

    return tape.record_op("relu", (a,), np.where(positive, a.data, 0).astype(a.dtype, copy=False), backward)


def masked_max_pool(features, group_ids, n_groups):
    """
    Max pooling por grupo.

    out[g][d] = max de features[i][d] sobre os pontos com group_ids[i] == g.
    Empates ficam com o menor índice de ponto. Grupos vazios recebem uma
    linha de zeros e ficam marcados em `empty`; quem chama decide o que usar
    no lugar.

    Returns:
        PoolResult(tokens [G x D], argmax [G x D] com -1 nos grupos vazios, empty [G])
    """
    _require_2d("masked_max_pool", features)
    n_points, dim = features.shape
    group_ids = np.asarray(group_ids).reshape(-1)
    if n_points < 1:
        raise ShapeException("masked_max_pool needs at least one point")
    if group_ids.shape[0] != n_points:
        raise ShapeException("got {} group ids for {} points".format(group_ids.shape[0], n_points))
    if not np.issubdtype(group_ids.dtype, np.integer) or group_ids.min() < 0 or group_ids.max() >= n_groups:
        raise InvalidInputException("group ids must be integers in [0, {})".format(n_groups))
    tape = tape_of(features)

    order = np.argsort(group_ids, kind="stable")
    counts = np.bincount(group_ids, minlength=n_groups)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    empty = counts == 0
    sorted_features = features.data[order]
    columns = np.arange(dim)

    tokens = np.zeros((n_groups, dim), dtype=features.dtype)
    argmax = np.full((n_groups, dim), -1, dtype=np.int64)
    for group in np.flatnonzero(~empty):
        start = starts[group]
        segment = sorted_features[start:start + counts[group]]
        first = segment.argmax(axis=0)
        tokens[group] = segment[first, columns]
        argmax[group] = order[start + first]
    tape.note_branch(argmax)

    def backward(grad):
        grad_in = np.zeros((n_points, dim), dtype=grad.dtype)
        rows = argmax[~empty]
        grad_in[rows, np.broadcast_to(columns, rows.shape)] = grad[~empty]
        return (grad_in,)

    out = tape.record_op("masked_max_pool", (features,), tokens, backward)
    return PoolResult(out, argmax, empty)


def _softmax(values):
    shifted = values - values.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def softmax(a):
    tape = tape_of(a)
    probs = _softmax(a.data)

    def backward(grad):
        return (probs * (grad - (grad * probs).sum(axis=-1, keepdims=True)),)

    return tape.record_op("softmax", (a,), probs, backward)


def scaled_dot_attention(query, keys, values):
    """
    Atenção de consulta única: softmax(q Kᵀ / sqrt(D)) V.

    Returns:
        (Tensor [1 x D], pesos de atenção [G]); os pesos são uma cópia
        para inspeção.
    """
    for name, tensor in (("query", query), ("keys", keys), ("values", values)):
        _require_2d("scaled_dot_attention " + name, tensor)
    if query.shape[0] != 1 or keys.shape[0] < 1 or keys.shape != values.shape or query.shape[1] != keys.shape[1]:
        raise ShapeException("attention shape mismatch q={} k={} v={}".format(query.shape, keys.shape, values.shape))
    tape = tape_of(query, keys, values)
    q, k, v = query.data, keys.data, values.data
    scale = 1.0 / np.sqrt(q.shape[1])
    weights = _softmax((q @ k.T) * scale)

    def backward(grad):
        grad_weights = grad @ v.T
        grad_scores = weights * (grad_weights - (grad_weights * weights).sum(axis=-1, keepdims=True))
        return (grad_scores @ k) * scale, (grad_scores.T @ q) * scale, weights.T @ grad

    out = tape.record_op("scaled_dot_attention", (query, keys, values), weights @ v, backward)
    return out, weights.reshape(-1).copy()


def cross_entropy(logits, targets):
    """
    Entropia cruzada média, calculada em espaço log.

    Aceita logits [C] com um índice de classe ou [B x C] com B índices.
    """
    tape = tape_of(logits)
    values = logits.data
    single = values.ndim == 1
    batch = values.reshape(1, -1) if single else values
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    n_rows, n_classes = batch.shape
    if targets.shape[0] != n_rows:
        raise ShapeException("got {} targets for {} logit rows".format(targets.shape[0], n_rows))
    if np.any(targets < 0) or np.any(targets >= n_classes):
        raise InvalidInputException("class index out of range for {} classes: {}".format(n_classes, targets))

    rows = np.arange(n_rows)
    top = batch.argmax(axis=1)
    shifted = batch - batch[rows, top][:, None]
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=1, keepdims=True)
    exps[rows, top] = 0
    losses = np.log1p(exps.sum(axis=1)) - shifted[rows, targets]
    loss = np.asarray(losses.mean(), dtype=values.dtype)

    def backward(grad):
        delta = probs.copy()
        delta[rows, targets] -= 1
        delta *= grad / n_rows
        return (delta.reshape(values.shape),)

    return tape.record_op("cross_entropy", (logits,), loss, backward)


def concat(tensors, axis=1):
    tensors = list(tensors)
    tape = tape_of(*tensors)
    sizes = [t.shape[axis] for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeException("concat shape mismatch: {}".format(e))
    splits = np.cumsum(sizes)[:-1]

    def backward(grad):
        return tuple(np.split(grad, splits, axis=axis))

    return tape.record_op("concat", tuple(tensors), data, backward)


def take_rows(a, index):
    tape = tape_of(a)
    index = np.asarray(index, dtype=np.int64)

    def backward(grad):
        grad_in = np.zeros_like(a.data)
        np.add.at(grad_in, index, grad)
        return (grad_in,)

    return tape.record_op("take_rows", (a,), a.data[index], backward)


def replace_rows(a, mask, row):
    """Substitui as linhas de `a` marcadas em `mask` pelo vetor `row`."""
    _require_2d("replace_rows", a)
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.shape[0] != a.shape[0] or row.data.ndim != 1 or row.shape[0] != a.shape[1]:
        raise ShapeException("replace_rows shape mismatch {} / {} / {}".format(a.shape, mask.shape, row.shape))
    tape = tape_of(a, row)
    data = a.data.copy()
    data[mask] = row.data

    def backward(grad):
        grad_a = grad.copy()
        grad_a[mask] = 0
        return grad_a, grad[mask].sum(axis=0)

    return tape.record_op("replace_rows", (a, row), data, backward)


def reduce_sum(a):
    tape = tape_of(a)

    def backward(grad):
        return (np.broadcast_to(grad, a.shape).copy(),)

    return tape.record_op("reduce_sum", (a,), np.asarray(a.data.sum(), dtype=a.dtype), backward)
