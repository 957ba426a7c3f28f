"""
Tensor: the core data structure of the autodiff engine.

A Tensor holds a float64 NumPy array and, when it was produced by a
differentiable primitive, a reference to the `Node` that recorded the
operation. The collection of nodes reachable from an output forms the tape
walked by `src.tensor.tape.backward`.
"""
import itertools
import logging
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import NumericalError

logger = logging.getLogger(__name__)

_node_ids = itertools.count(1)

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]


class Node:
    """
    Record of one primitive application.

    Attributes:
        node_id: Opaque, process-unique identity of this tape node
        op: The primitive instance (holds the context saved by its forward pass)
        inputs: Input tensors, in argument order
    """

    __slots__ = ("node_id", "op", "inputs")

    def __init__(self, op: "Primitive", inputs: Tuple["Tensor", ...]):
        self.node_id = next(_node_ids)
        self.op = op
        self.inputs = inputs

    def __repr__(self):
        return f"Node(id={self.node_id}, op={self.op.name})"


class Primitive:
    """
    Base class for differentiable operations.

    Subclasses implement `forward` on raw arrays and `backward`, which maps
    the gradient w.r.t. the output to one gradient per input (or None for
    inputs that need no gradient). `backward` must not mutate saved context,
    so a tape can be replayed any number of times.
    """

    name = "primitive"

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"Forward pass not implemented for {self.name}")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"Backward pass not implemented for {self.name}")

    @classmethod
    def apply(cls, *inputs: Union["Tensor", ArrayLike], **kwargs: Any) -> "Tensor":
        """
        Run the forward pass and record a tape node when any input needs gradients.

        Args:
            *inputs: Input tensors (plain arrays/scalars are wrapped as constants)
            **kwargs: Static arguments for the forward pass

        Returns:
            The output tensor
        """
        tensors = tuple(as_tensor(t) for t in inputs)
        op = cls()
        out = op.forward(*(t.values for t in tensors), **kwargs)
        requires_grad = any(t.requires_grad for t in tensors)
        node = Node(op, tensors) if requires_grad else None
        return Tensor(out, requires_grad=requires_grad, node=node, _op_name=cls.name)

    @staticmethod
    def unbroadcast(grad: np.ndarray, to_shape: Tuple[int, ...]) -> np.ndarray:
        """Sum out broadcast dimensions so that `grad` matches `to_shape`."""
        if grad.shape == to_shape:
            return grad
        while grad.ndim > len(to_shape):
            grad = grad.sum(axis=0)
        for dim, size in enumerate(to_shape):
            if size == 1 and grad.shape[dim] != 1:
                grad = grad.sum(axis=dim, keepdims=True)
        return grad.reshape(to_shape)


class Tensor:
    """
    n-dimensional float64 array participating in reverse-mode differentiation.

    Scalars are stored with shape (1,); every shape is a tuple of positive
    integers. Non-finite values are rejected at construction, which is where
    every primitive output passes through.
    """

    def __init__(
        self,
        values: ArrayLike,
        requires_grad: bool = False,
        node: Optional[Node] = None,
        name: Optional[str] = None,
        _op_name: str = "leaf",
    ):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if not np.all(np.isfinite(arr)):
            raise NumericalError(
                _op_name,
                node.node_id if node is not None else None,
                {"name": name, "shape": arr.shape},
            )
        self.values = arr
        self.requires_grad = requires_grad
        self.node = node
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self.tensor_id = next(_node_ids) if node is None else node.node_id

    # --- Introspection ---

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def __float__(self) -> float:
        return self.item()

    def numpy(self) -> np.ndarray:
        return self.values.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.values, requires_grad=False, name=self.name)

    def __repr__(self):
        grad_flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad_flag})"

    def __len__(self):
        return self.shape[0]

    # --- Arithmetic ---

    def __add__(self, other):
        return F.add(self, other)

    def __radd__(self, other):
        return F.add(other, self)

    def __sub__(self, other):
        return F.sub(self, other)

    def __rsub__(self, other):
        return F.sub(other, self)

    def __mul__(self, other):
        return F.mul(self, other)

    def __rmul__(self, other):
        return F.mul(other, self)

    def __truediv__(self, other):
        return F.div(self, other)

    def __rtruediv__(self, other):
        return F.div(other, self)

    def __neg__(self):
        return F.mul(self, -1.0)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def __rmatmul__(self, other):
        return F.matmul(other, self)

    # --- Elementwise and reductions ---

    def relu(self) -> "Tensor":
        return F.relu(self)

    def sigmoid(self) -> "Tensor":
        return F.sigmoid(self)

    def log(self) -> "Tensor":
        return F.log(self)

    def exp(self) -> "Tensor":
        return F.exp(self)

    def abs(self) -> "Tensor":
        return F.abs(self)

    def sum(self, axis=None) -> "Tensor":
        return F.sum(self, axis=axis)

    def mean(self, axis=None) -> "Tensor":
        return F.mean(self, axis=axis)

    def max(self) -> "Tensor":
        return F.max(self)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def flatten(self) -> "Tensor":
        return F.reshape(self, (self.size,))

    def take(self, indices, axis: int = 0) -> "Tensor":
        return F.take(self, indices, axis=axis)


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap arrays and scalars as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def parameter(values: ArrayLike, name: Optional[str] = None) -> Tensor:
    """Create a leaf tensor that requires gradients."""
    return Tensor(values, requires_grad=True, name=name)


# Imported last: functional needs Tensor and Primitive defined above
from src.tensor import functional as F  # noqa: E402
