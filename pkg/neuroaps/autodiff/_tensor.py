import hashlib
import logging

import numpy as np

from neuroaps.api.exceptions import NumericalException, ShapeException

logger = logging.getLogger(__name__)


class Tensor:
    __slots__ = ("data", "grad", "tape", "requires_grad", "name", "node_id")

    def __init__(self, data, tape=None, requires_grad=False, name=None):
        self.data = data
        self.grad = None
        self.tape = tape
        self.requires_grad = requires_grad
        self.name = name
        self.node_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def nbytes(self):
        return self.data.nbytes

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return "<Tensor {} shape={} dtype={}{}>".format(self.name or "", self.shape, self.dtype,
                                                        " grad" if self.requires_grad else "")


class Node:
    __slots__ = ("node_id", "op", "inputs", "output", "backward")

    def __init__(self, node_id, op, inputs, output, backward):
        self.node_id = node_id
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """
    Fita de gravação para diferenciação reversa.

    Cada primitiva registra um Node com as entradas e uma função de backward.
    O backward percorre os nós exatamente na ordem inversa de gravação.

    A fita também contabiliza os bytes de todos os buffers vivos que passaram
    por ela (parâmetros, ativações, gradientes e estado do otimizador via
    account()). peak_live_bytes é a marca d'água desse total.

    Args:
        dtype: precisão dos tensores criados por watch()/constant()
        record: se False, nada é gravado (modo inferência); os bytes continuam
                sendo contabilizados
    """

    def __init__(self, dtype=np.float32, record=True):
        self.dtype = np.dtype(dtype)
        self.record = record
        self.nodes = []
        self.live_bytes = 0
        self.peak_live_bytes = 0
        self._branches = hashlib.blake2b(digest_size=16)

    def account(self, nbytes):
        self.live_bytes += int(nbytes)
        if self.live_bytes > self.peak_live_bytes:
            self.peak_live_bytes = self.live_bytes

    def reset(self):
        self.nodes = []
        self.live_bytes = 0
        self.peak_live_bytes = 0
        self._branches = hashlib.blake2b(digest_size=16)

    def watch(self, array, name=None):
        tensor = Tensor(np.array(array, dtype=self.dtype), self, requires_grad=self.record, name=name)
        self.account(tensor.nbytes)
        return tensor

    def constant(self, array, name=None):
        tensor = Tensor(np.asarray(array, dtype=self.dtype), self, requires_grad=False, name=name)
        self.account(tensor.nbytes)
        return tensor

    def note_branch(self, array):
        # relu masks and max-pool argmaxes; used to detect kinks in finite differences
        self._branches.update(np.ascontiguousarray(array).tobytes())

    @property
    def branch_signature(self):
        return self._branches.hexdigest()

    def record_op(self, op, inputs, data, backward):
        if not np.isfinite(data).all():
            raise NumericalException("{} produced non-finite values".format(op))
        requires_grad = self.record and any(t.requires_grad for t in inputs)
        output = Tensor(data, self, requires_grad=requires_grad)
        self.account(output.nbytes)
        if requires_grad:
            node = Node(len(self.nodes), op, inputs, output, backward)
            output.node_id = node.node_id
            self.nodes.append(node)
        return output

    def _accumulate(self, tensor, grad):
        grad = np.asarray(grad, dtype=tensor.data.dtype)
        if grad.shape != tensor.shape:
            raise ShapeException("gradient shape {} does not match tensor shape {}".format(grad.shape, tensor.shape))
        if tensor.grad is None:
            tensor.grad = np.array(grad, copy=True)
            self.account(tensor.grad.nbytes)
        else:
            tensor.grad += grad

    def backward(self, loss):
        if loss.tape is not self:
            raise ShapeException("loss tensor was not recorded on this tape")
        if loss.data.size != 1:
            raise ShapeException("backward needs a scalar loss, got shape {}".format(loss.shape))
        if not loss.requires_grad:
            return
        self._accumulate(loss, np.ones_like(loss.data))
        for node in reversed(self.nodes):
            grad = node.output.grad
            if grad is None:
                continue
            input_grads = node.backward(grad)
            for tensor, input_grad in zip(node.inputs, input_grads):
                if input_grad is None or not tensor.requires_grad:
                    continue
                self._accumulate(tensor, input_grad)
        logger.debug("backward over %d nodes, peak %d bytes", len(self.nodes), self.peak_live_bytes)


def tape_of(*tensors):
    for tensor in tensors:
        if isinstance(tensor, Tensor) and tensor.tape is not None:
            return tensor.tape
    raise ShapeException("operation needs at least one tensor attached to a tape")
