"""
Tape construction and the reverse-mode backward pass.

The tape is the topologically ordered record of every node reachable from a
scalar output. Building it never mutates tensors, and `Tape.backward`
accumulates into a fresh dictionary each call, so replaying the same tape
yields identical gradients.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.tensor.tensor import Tensor
from src.utils.errors import GradientError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TapeEntry:
    """One recorded primitive: op name plus input/output node identities."""

    op_name: str
    output_id: int
    input_ids: Tuple[int, ...]


class Tape:
    """Ordered record of the primitives that produced `output`."""

    def __init__(self, output: Tensor):
        self.output = output
        self.order: List[Tensor] = self._topological_order(output)
        self.tensors: Dict[int, Tensor] = {t.tensor_id: t for t in self.order}

    @staticmethod
    def _topological_order(output: Tensor) -> List[Tensor]:
        # Iterative post-order DFS; deep nets would overflow the recursion limit
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if not tensor.requires_grad:
                continue
            if expanded:
                order.append(tensor)
                continue
            if tensor.tensor_id in visited:
                continue
            visited.add(tensor.tensor_id)
            stack.append((tensor, True))
            if tensor.node is not None:
                for parent in reversed(tensor.node.inputs):
                    if parent.requires_grad and parent.tensor_id not in visited:
                        stack.append((parent, False))
        return order

    @property
    def entries(self) -> List[TapeEntry]:
        return [
            TapeEntry(t.node.op.name, t.tensor_id, tuple(p.tensor_id for p in t.node.inputs))
            for t in self.order
            if t.node is not None
        ]

    def __contains__(self, tensor: Tensor) -> bool:
        return tensor.tensor_id in self.tensors

    def __len__(self) -> int:
        return len(self.order)

    def backward(self, wanted: Sequence[Tensor]) -> List[np.ndarray]:
        """
        Compute d(output)/d(t) for every tensor in `wanted`.

        Args:
            wanted: Tensors on this tape (typically leaves)

        Returns:
            Gradients in the order of `wanted`, each shaped like its tensor

        Raises:
            GradientError: If a wanted tensor is not an ancestor of the output
            NumericalError: If a non-finite gradient is produced
        """
        for t in wanted:
            if t not in self:
                raise GradientError(
                    "Requested tensor is not on the tape",
                    {"tensor": t.tensor_id, "name": t.name, "requires_grad": t.requires_grad},
                )

        grads: Dict[int, np.ndarray] = {self.output.tensor_id: np.ones(self.output.shape)}
        for tensor in reversed(self.order):
            grad = grads.get(tensor.tensor_id)
            if grad is None or tensor.node is None:
                continue
            input_grads = tensor.node.op.backward(grad)
            for parent, g in zip(tensor.node.inputs, input_grads):
                if g is None or not parent.requires_grad:
                    continue
                if not np.all(np.isfinite(g)):
                    raise NumericalError(
                        tensor.node.op.name,
                        tensor.node.node_id,
                        {"phase": "backward", "input": parent.tensor_id},
                    )
                prev = grads.get(parent.tensor_id)
                grads[parent.tensor_id] = g if prev is None else prev + g

        return [np.array(grads.get(t.tensor_id, np.zeros(t.shape)), dtype=np.float64).reshape(t.shape) for t in wanted]


def backward(scalar_output: Tensor, wanted: Sequence[Tensor], store: bool = False) -> List[np.ndarray]:
    """
    Reverse-mode gradients of a scalar output.

    Args:
        scalar_output: Tensor of shape (1,)
        wanted: Tensors whose gradients are requested
        store: Also write each gradient into `tensor.grad`

    Returns:
        One gradient array per wanted tensor

    Raises:
        GradientError: If the output is not scalar or a tensor is not on the tape
    """
    if scalar_output.shape != (1,):
        raise GradientError("backward requires a scalar output", {"shape": scalar_output.shape})
    if not scalar_output.requires_grad:
        raise GradientError("Output does not depend on any tensor that requires gradients")
    tape = Tape(scalar_output)
    grads = tape.backward(wanted)
    if store:
        for t, g in zip(wanted, grads):
            t.grad = g
    return grads
