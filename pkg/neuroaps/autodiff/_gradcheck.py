import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from neuroaps.api.exceptions import NumericalException
from neuroaps.autodiff._tensor import Tape

logger = logging.getLogger(__name__)


@dataclass
class GradCheckEntry:
    name: str
    index: Tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    checked: int = 0
    excluded: int = 0
    max_rel_error: float = 0.0
    worst: Optional[GradCheckEntry] = None
    entries: List[GradCheckEntry] = field(default_factory=list)

    def passed(self, tolerance):
        return self.max_rel_error < tolerance


def _evaluate(loss_fn, params, record):
    tape = Tape(np.float64, record=record)
    tensors = {name: tape.watch(value, name) for name, value in params.items()}
    loss = loss_fn(tensors)
    value = float(loss.data)
    if not np.isfinite(value):
        raise NumericalException("loss is not finite: {}".format(value))
    return tape, tensors, loss, value


def finite_difference_check(loss_fn, params, h=1e-5, tolerance=1e-4, n_coords=64, seed=0, floor=1e-6):
    """
    Compara os gradientes da fita com diferenças centrais.

    Sorteia coordenadas dos parâmetros até verificar `n_coords` delas.
    Coordenadas cuja perturbação ±h muda o padrão de ativação das ReLU ou o
    argmax do max pooling (um "kink") são excluídas e contadas à parte.

    Args:
        loss_fn: função pura dict[nome -> Tensor] -> Tensor escalar
        params: dicionário nome -> array (convertido para float64)
        h: passo da diferença central
        tolerance: usado apenas para o log do resultado
        n_coords: número de coordenadas verificadas
        seed: semente do sorteio de coordenadas
        floor: piso do denominador do erro relativo

    Returns:
        GradCheckReport com o maior erro relativo encontrado
    """
    params = {name: np.array(value, dtype=np.float64) for name, value in params.items()}
    report = GradCheckReport()
    total = sum(value.size for value in params.values())
    if n_coords <= 0 or total == 0:
        return report

    tape, tensors, loss, _ = _evaluate(loss_fn, params, record=True)
    tape.backward(loss)
    signature = tape.branch_signature
    analytic = {name: (t.grad if t.grad is not None else np.zeros_like(t.data)) for name, t in tensors.items()}

    names = list(params)
    offsets = np.cumsum([0] + [params[name].size for name in names])
    rng = np.random.default_rng(seed)
    for flat in rng.permutation(total):
        if report.checked >= n_coords:
            break
        slot = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[slot]
        index = np.unravel_index(int(flat - offsets[slot]), params[name].shape)

        original = params[name][index]
        params[name][index] = original + h
        plus_tape, _, _, f_plus = _evaluate(loss_fn, params, record=False)
        params[name][index] = original - h
        minus_tape, _, _, f_minus = _evaluate(loss_fn, params, record=False)
        params[name][index] = original

        if plus_tape.branch_signature != signature or minus_tape.branch_signature != signature:
            report.excluded += 1
            continue
        numeric = (f_plus - f_minus) / (2.0 * h)
        exact = float(analytic[name][index])
        rel = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
        entry = GradCheckEntry(name, tuple(int(i) for i in index), exact, numeric, rel)
        report.entries.append(entry)
        report.checked += 1
        if report.worst is None or rel > report.max_rel_error:
            report.max_rel_error = rel
            report.worst = entry

    logger.info("gradient check: %d coordinates, %d excluded at kinks, max rel error %.3e (tolerance %.1e)",
                report.checked, report.excluded, report.max_rel_error, tolerance)
    return report
