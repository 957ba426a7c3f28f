"""
Differentiable primitives and their functional wrappers.

The fixed primitive set covers dense and 2-D convolutional networks:
matmul, conv2d, add/sub/mul/div, relu, sigmoid, log, exp, abs, sum, mean,
max, L1-norm, L2-norm, reshape, concat, take, clip-stop, max-pool 2x2 and
upsample 2x2. Composite helpers (log-mean-exp, square) are built from these.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.tensor.tensor import Primitive, Tensor, as_tensor
from src.utils.errors import ShapeMismatchError

Axis = Optional[Union[int, Tuple[int, ...]]]


def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _scalar_safe(arr: np.ndarray) -> np.ndarray:
    return arr.reshape(1) if arr.ndim == 0 else arr


# --- Binary elementwise ---


class Add(Primitive):
    name = "add"

    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(grad, self.shapes[1])


class Sub(Primitive):
    name = "sub"

    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(-grad, self.shapes[1])


class Mul(Primitive):
    name = "mul"

    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (
            self.unbroadcast(grad * self.b, self.a.shape),
            self.unbroadcast(grad * self.a, self.b.shape),
        )


class Div(Primitive):
    name = "div"

    def forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        return (
            self.unbroadcast(grad / self.b, self.a.shape),
            self.unbroadcast(-grad * self.a / (self.b * self.b), self.b.shape),
        )


class MatMul(Primitive):
    """Matrix product for 1-D and 2-D operands (vector cases promoted)."""

    name = "matmul"

    def forward(self, a, b):
        if a.ndim > 2 or b.ndim > 2:
            raise ShapeMismatchError("matmul", "operands with ndim <= 2", (a.shape, b.shape))
        a2 = a if a.ndim == 2 else a[None, :]
        b2 = b if b.ndim == 2 else b[:, None]
        if a2.shape[1] != b2.shape[0]:
            raise ShapeMismatchError("matmul", f"inner dims equal ({a2.shape[1]})", (a.shape, b.shape))
        self.a_shape, self.b_shape = a.shape, b.shape
        self.a2, self.b2 = a2, b2
        out = a2 @ b2
        self.out2_shape = out.shape
        return _scalar_safe(np.matmul(a, b)) if (a.ndim < 2 or b.ndim < 2) else out

    def backward(self, grad):
        g2 = grad.reshape(self.out2_shape)
        ga = (g2 @ self.b2.T).reshape(self.a_shape)
        gb = (self.a2.T @ g2).reshape(self.b_shape)
        return ga, gb


# --- Unary elementwise ---


class ReLU(Primitive):
    """ReLU with subgradient 0 at 0."""

    name = "relu"

    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Primitive):
    name = "sigmoid"

    def forward(self, x):
        # tanh form avoids overflow in exp for large |x|
        self.s = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self.s

    def backward(self, grad):
        return (grad * self.s * (1.0 - self.s),)


class Log(Primitive):
    name = "log"

    def forward(self, x):
        self.x = x
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Exp(Primitive):
    name = "exp"

    def forward(self, x):
        with np.errstate(over="ignore"):
            self.e = np.exp(x)
        return self.e

    def backward(self, grad):
        return (grad * self.e,)


class Abs(Primitive):
    name = "abs"

    def forward(self, x):
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad):
        return (grad * self.sign,)


class ClipStop(Primitive):
    """Clip in the forward pass, identity in the backward pass."""

    name = "clip_stop"

    def forward(self, x, lo: float = 0.0, hi: float = 1.0):
        return np.clip(x, lo, hi)

    def backward(self, grad):
        return (grad,)


# --- Reductions ---


class Sum(Primitive):
    name = "sum"

    def forward(self, x, axis: Axis = None):
        self.in_shape = x.shape
        self.axes = _normalize_axes(axis, x.ndim)
        return _scalar_safe(np.sum(x, axis=self.axes))

    def backward(self, grad):
        keep = tuple(1 if i in self.axes else s for i, s in enumerate(self.in_shape))
        return (np.broadcast_to(grad.reshape(keep), self.in_shape),)


class Mean(Primitive):
    name = "mean"

    def forward(self, x, axis: Axis = None):
        self.in_shape = x.shape
        self.axes = _normalize_axes(axis, x.ndim)
        self.count = int(np.prod([x.shape[a] for a in self.axes]))
        return _scalar_safe(np.mean(x, axis=self.axes))

    def backward(self, grad):
        keep = tuple(1 if i in self.axes else s for i, s in enumerate(self.in_shape))
        return (np.broadcast_to(grad.reshape(keep) / self.count, self.in_shape),)


class Max(Primitive):
    """Full reduction to the maximum; gradient flows to the first argmax."""

    name = "max"

    def forward(self, x):
        self.in_shape = x.shape
        self.index = int(np.argmax(x))
        return x.reshape(-1)[self.index : self.index + 1].copy()

    def backward(self, grad):
        g = np.zeros(int(np.prod(self.in_shape)))
        g[self.index] = grad.reshape(-1)[0]
        return (g.reshape(self.in_shape),)


class L2Norm(Primitive):
    """Euclidean norm of all entries; subgradient 0 at the origin."""

    name = "l2_norm"

    def forward(self, x):
        self.x = x
        self.norm = float(np.sqrt(np.sum(x * x)))
        return np.array([self.norm])

    def backward(self, grad):
        if self.norm == 0.0:
            return (np.zeros_like(self.x),)
        return (grad.reshape(()) * self.x / self.norm,)


class L1Norm(Primitive):
    name = "l1_norm"

    def forward(self, x):
        self.sign = np.sign(x)
        return np.array([np.sum(np.abs(x))])

    def backward(self, grad):
        return (grad.reshape(()) * self.sign,)


# --- Structural ---


class Reshape(Primitive):
    name = "reshape"

    def forward(self, x, shape: Tuple[int, ...] = ()):
        self.in_shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class Concat(Primitive):
    name = "concat"

    def forward(self, *arrays, axis: int = 0):
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


class Take(Primitive):
    """Gather entries along one axis; the backward pass scatter-adds."""

    name = "take"

    def forward(self, x, indices=None, axis: int = 0):
        self.in_shape = x.shape
        self.axis = axis % x.ndim
        self.indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        return np.take(x, self.indices, axis=self.axis)

    def backward(self, grad):
        g = np.zeros(self.in_shape)
        np.add.at(np.moveaxis(g, self.axis, 0), self.indices, np.moveaxis(grad, self.axis, 0))
        return (g,)


# --- Convolutional ---


class Conv2d(Primitive):
    """
    2-D cross-correlation with stride 1.

    Shapes: x (N, C, H, W), w (F, C, kh, kw), b (F,). `padding` is "same"
    (odd kernels, zero padding k // 2) or "valid".
    """

    name = "conv2d"

    def forward(self, x, w, b, padding: str = "same"):
        if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
            raise ShapeMismatchError("conv2d", "x (N,C,H,W) and w (F,C,kh,kw) with equal C", (x.shape, w.shape))
        kh, kw = w.shape[2], w.shape[3]
        if padding == "same":
            if kh % 2 == 0 or kw % 2 == 0:
                raise ShapeMismatchError("conv2d", "odd kernel for same padding", w.shape)
            self.pad = (kh // 2, kw // 2)
        elif padding == "valid":
            self.pad = (0, 0)
        else:
            raise ValueError(f"Unknown padding '{padding}'")
        ph, pw = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
        self.windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
        self.w = w
        self.x_shape = x.shape
        out = np.tensordot(self.windows, w, axes=([1, 4, 5], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2) + b[None, :, None, None]

    def backward(self, grad):
        kh, kw = self.w.shape[2], self.w.shape[3]
        gw = np.tensordot(self.windows, grad, axes=([0, 2, 3], [0, 2, 3])).transpose(3, 0, 1, 2)
        gb = grad.sum(axis=(0, 2, 3))
        gp = np.pad(grad, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        gwin = sliding_window_view(gp, (kh, kw), axis=(2, 3))
        w_flip = self.w[:, :, ::-1, ::-1]
        gxp = np.tensordot(gwin, w_flip, axes=([1, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2)
        ph, pw = self.pad
        h, w = self.x_shape[2], self.x_shape[3]
        gx = gxp[:, :, ph : ph + h, pw : pw + w]
        return gx, gw, gb


class MaxPool2x2(Primitive):
    name = "maxpool2x2"

    def forward(self, x):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeMismatchError("maxpool2x2", "even spatial dims", x.shape)
        self.in_shape = x.shape
        blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
        self.index = np.argmax(blocks, axis=-1)
        return np.take_along_axis(blocks, self.index[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, c, h, w = self.in_shape
        blocks = np.zeros((n, c, h // 2, w // 2, 4))
        np.put_along_axis(blocks, self.index[..., None], grad[..., None], axis=-1)
        g = blocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (g,)


class Upsample2x2(Primitive):
    """Nearest-neighbour upsampling by a factor of two."""

    name = "upsample2x2"

    def forward(self, x):
        self.in_shape = x.shape
        return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)

    def backward(self, grad):
        n, c, h, w = self.in_shape
        return (grad.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)


# --- Functional wrappers ---


def add(a, b) -> Tensor:
    return Add.apply(a, b)


def sub(a, b) -> Tensor:
    return Sub.apply(a, b)


def mul(a, b) -> Tensor:
    return Mul.apply(a, b)


def div(a, b) -> Tensor:
    return Div.apply(a, b)


def matmul(a, b) -> Tensor:
    return MatMul.apply(a, b)


def relu(x) -> Tensor:
    return ReLU.apply(x)


def sigmoid(x) -> Tensor:
    return Sigmoid.apply(x)


def log(x) -> Tensor:
    return Log.apply(x)


def exp(x) -> Tensor:
    return Exp.apply(x)


def abs(x) -> Tensor:  # noqa: A001
    return Abs.apply(x)


def clip_stop(x, lo: float = 0.0, hi: float = 1.0) -> Tensor:
    return ClipStop.apply(x, lo=lo, hi=hi)


def sum(x, axis: Axis = None) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis)


def mean(x, axis: Axis = None) -> Tensor:
    return Mean.apply(x, axis=axis)


def max(x) -> Tensor:  # noqa: A001
    return Max.apply(x)


def l2_norm(x) -> Tensor:
    return L2Norm.apply(x)


def l1_norm(x) -> Tensor:
    return L1Norm.apply(x)


def reshape(x, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def take(x, indices, axis: int = 0) -> Tensor:
    return Take.apply(x, indices=indices, axis=axis)


def conv2d(x, w, b, padding: str = "same") -> Tensor:
    return Conv2d.apply(x, w, b, padding=padding)


def maxpool2x2(x) -> Tensor:
    return MaxPool2x2.apply(x)


def upsample2x2(x) -> Tensor:
    return Upsample2x2.apply(x)


def square(x) -> Tensor:
    x = as_tensor(x)
    return Mul.apply(x, x)


def log_mean_exp(t: Tensor, axis: Optional[int] = None) -> Tensor:
    """
    log(mean(exp(t))) with a max shift.

    The shift is a constant on the tape; the gradient of log-mean-exp does
    not depend on it, so the result and its gradient are exact.
    """
    t = as_tensor(t)
    if axis is None:
        shift = float(np.max(t.values))
        return add(log(mean(exp(sub(t, shift)))), shift)
    shift_arr = np.max(t.values, axis=axis, keepdims=True)
    lme = log(mean(exp(sub(t, shift_arr)), axis=axis))
    return add(lme, shift_arr.reshape(lme.shape))
