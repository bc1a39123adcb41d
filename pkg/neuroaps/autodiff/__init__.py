"""Reverse-mode differentiation for the NeuroAPS network.

A tape records numpy primitives and replays their gradient rules in reverse
order. It also counts live buffer bytes, which the bench reports as the
peak workspace of a pass.
"""

from ._tensor import Tensor, Tape, tape_of
from ._ops import (matmul, add_bias, linear, relu, masked_max_pool, softmax, scaled_dot_attention,
                   cross_entropy, concat, take_rows, replace_rows, reduce_sum, PoolResult)
from ._optim import AdamState, adam_step
from ._gradcheck import finite_difference_check, GradCheckReport, GradCheckEntry

__all__ = ('Tensor', 'Tape', 'tape_of', 'matmul', 'add_bias', 'linear', 'relu', 'masked_max_pool', 'softmax',
           'scaled_dot_attention', 'cross_entropy', 'concat', 'take_rows', 'replace_rows', 'reduce_sum',
           'PoolResult', 'AdamState', 'adam_step', 'finite_difference_check', 'GradCheckReport',
           'GradCheckEntry')
