from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from neuroaps.api.exceptions import ShapeException


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def nbytes(self):
        return sum(a.nbytes for a in self.m.values()) + sum(a.nbytes for a in self.v.values())

    def copy(self):
        return AdamState(self.learning_rate, self.beta1, self.beta2, self.epsilon, self.step,
                         {k: a.copy() for k, a in self.m.items()}, {k: a.copy() for k, a in self.v.items()})


def adam_step(params, grads, state: AdamState):
    """
    Um passo do Adam com correção de viés.

    Não altera os arrays recebidos: devolve novos parâmetros e um novo estado.

    Args:
        params: dicionário nome -> array
        grads: dicionário nome -> gradiente com a mesma forma
        state: AdamState atual

    Returns:
        (novos parâmetros, novo AdamState)
    """
    state = state.copy()
    state.step += 1
    bias1 = 1.0 - state.beta1 ** state.step
    bias2 = 1.0 - state.beta2 ** state.step
    updated = {}
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        if grad.shape != value.shape:
            raise ShapeException("gradient for {} has shape {}, expected {}".format(name, grad.shape, value.shape))
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(value)
            v = np.zeros_like(value)
        if m.shape != value.shape or v.shape != value.shape:
            raise ShapeException("moment buffers for {} do not match shape {}".format(name, value.shape))
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * (grad * grad)
        m_hat = m / bias1
        v_hat = v / bias2
        update = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
        updated[name] = (value - update).astype(value.dtype, copy=False)
        state.m[name] = m.astype(value.dtype, copy=False)
        state.v[name] = v.astype(value.dtype, copy=False)
    return updated, state
