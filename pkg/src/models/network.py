"""
Model state and forward passes.

Every model takes batched input of shape (N, *input_shape); the public
helpers accept a single sample as well and add the batch axis themselves.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.specs import AUTOENCODER_KINDS, ModelSpec
from src.tensor import Tensor, as_tensor, parameter
from src.tensor import functional as F
from src.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

TensorLike = Union[Tensor, np.ndarray]


@dataclass
class TrainingMetadata:
    epochs_run: int = 0
    initial_loss: Optional[float] = None
    final_loss: Optional[float] = None
    seed: Optional[int] = None
    loss_history: List[float] = field(default_factory=list)


@dataclass
class ModelState:
    """
    A ModelSpec together with its parameters and training metadata.

    Parameters are plain float64 arrays so a trained state can be pickled
    into worker processes.
    """

    spec: ModelSpec
    params: List[np.ndarray]
    metadata: TrainingMetadata = field(default_factory=TrainingMetadata)

    def __post_init__(self):
        layout = self.spec.param_layout()
        if len(layout) != len(self.params):
            raise ShapeMismatchError("ModelState", f"{len(layout)} parameter tensors", len(self.params))
        for i, ((_, shape), p) in enumerate(zip(layout, self.params)):
            if tuple(p.shape) != shape:
                raise ShapeMismatchError("ModelState", shape, p.shape, {"param_index": i})
        self.params = [np.asarray(p, dtype=np.float64) for p in self.params]

    def copy(self) -> "ModelState":
        meta = replace(self.metadata, loss_history=list(self.metadata.loss_history))
        return ModelState(self.spec, [p.copy() for p in self.params], meta)

    def tensors(self, requires_grad: bool = False) -> List[Tensor]:
        if requires_grad:
            return [parameter(p) for p in self.params]
        return [Tensor(p) for p in self.params]


def init_params(spec: ModelSpec, rng: np.random.Generator) -> List[np.ndarray]:
    """Glorot-uniform weights, zero biases."""
    params = []
    for kind, shape in spec.param_layout():
        if len(shape) == 1:
            params.append(np.zeros(shape))
            continue
        if kind == "dense":
            fan_in, fan_out = shape
        else:
            receptive = shape[2] * shape[3]
            fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, size=shape))
    return params


def init_model(spec: ModelSpec, seed: int) -> ModelState:
    params = init_params(spec, np.random.default_rng(seed))
    return ModelState(spec, params, TrainingMetadata(seed=seed))


def zero_model(spec: ModelSpec) -> ModelState:
    return ModelState(spec, [np.zeros(shape) for _, shape in spec.param_layout()])


def forward(
    spec: ModelSpec, params: Sequence[Tensor], x: TensorLike, stop_after: Optional[int] = None
) -> Tuple[Tensor, Optional[Tensor]]:
    """
    Run the layers of `spec` on a batch.

    Args:
        spec: Architecture
        params: Parameter tensors in `spec.param_layout()` order
        x: Batch of shape (N, *input_shape)
        stop_after: Return after this layer index instead of running all layers

    Returns:
        (output, latent) where latent is the output of the layer flagged
        `latent`, or None when that layer was not reached
    """
    h = as_tensor(x)
    if tuple(h.shape[1:]) != tuple(spec.input_shape):
        raise ShapeMismatchError("forward", (None, *spec.input_shape), h.shape, {"model": spec.kind})
    n = h.shape[0]
    latent = None
    p = 0
    for i, layer in enumerate(spec.layers):
        if layer.kind == "dense":
            h = F.add(F.matmul(h, params[p]), params[p + 1])
            p += 2
        elif layer.kind == "conv2d":
            h = F.conv2d(h, params[p], params[p + 1], padding=layer.padding)
            p += 2
        elif layer.kind == "relu":
            h = F.relu(h)
        elif layer.kind == "sigmoid":
            h = F.sigmoid(h)
        elif layer.kind == "maxpool2":
            h = F.maxpool2x2(h)
        elif layer.kind == "upsample2":
            h = F.upsample2x2(h)
        elif layer.kind == "flatten":
            h = F.reshape(h, (n, -1))
        elif layer.kind == "reshape":
            h = F.reshape(h, (n, *layer.shape))
        if layer.latent:
            latent = h
        if stop_after is not None and i == stop_after:
            break
    return h, latent


def _batched(x: TensorLike, input_shape: Sequence[int], operation: str) -> Tuple[Tensor, bool]:
    t = as_tensor(x)
    shape = tuple(input_shape)
    if tuple(t.shape) == shape:
        return F.reshape(t, (1, *shape)), True
    if tuple(t.shape[1:]) == shape and t.ndim == len(shape) + 1:
        return t, False
    raise ShapeMismatchError(operation, shape, t.shape)


def ae_forward(model: ModelState, x: TensorLike, params: Optional[Sequence[Tensor]] = None) -> Tensor:
    """
    Reconstruction of x (single sample or batch); output shaped like x.

    Raises:
        ShapeMismatchError: If x does not match the model's input shape
    """
    if model.spec.kind not in AUTOENCODER_KINDS:
        raise ValueError(f"ae_forward needs an autoencoder, got {model.spec.kind}")
    xb, single = _batched(x, model.spec.input_shape, "ae_forward")
    out, _ = forward(model.spec, params if params is not None else model.tensors(), xb)
    return F.reshape(out, model.spec.input_shape) if single else out


def classifier_logits(model: ModelState, x: TensorLike, params: Optional[Sequence[Tensor]] = None) -> Tensor:
    """Pre-softmax scores: (num_classes,) for one sample, (N, num_classes) for a batch."""
    if model.spec.kind != "classifier":
        raise ValueError(f"classifier_logits needs a classifier, got {model.spec.kind}")
    xb, single = _batched(x, model.spec.input_shape, "classifier_logits")
    out, _ = forward(model.spec, params if params is not None else model.tensors(), xb)
    return F.reshape(out, (model.spec.num_classes,)) if single else out


def predict_labels(model: ModelState, samples: np.ndarray, batch_size: int = 256) -> np.ndarray:
    labels = []
    for start in range(0, len(samples), batch_size):
        labels.append(np.argmax(classifier_logits(model, samples[start : start + batch_size]).values, axis=1))
    return np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)


def recon_loss(x: TensorLike, xhat: TensorLike) -> Tensor:
    """
    Euclidean norm ||x - xhat||_2 (not squared, not averaged).

    Raises:
        ShapeMismatchError: If the shapes differ
    """
    x, xhat = as_tensor(x), as_tensor(xhat)
    if x.shape != xhat.shape:
        raise ShapeMismatchError("recon_loss", x.shape, xhat.shape)
    return F.l2_norm(F.sub(x, xhat))


def per_sample_mse(model: ModelState, samples: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Mean squared reconstruction error of every sample."""
    errors = []
    for start in range(0, len(samples), batch_size):
        batch = samples[start : start + batch_size]
        recon = ae_forward(model, batch).values
        errors.append(((recon - batch) ** 2).reshape(len(batch), -1).mean(axis=1))
    return np.concatenate(errors) if errors else np.zeros(0)


def per_sample_recon_norm(model: ModelState, samples: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """||x - Phi(x)||_2 for every sample."""
    norms = []
    for start in range(0, len(samples), batch_size):
        batch = samples[start : start + batch_size]
        recon = ae_forward(model, batch).values
        norms.append(np.sqrt(((recon - batch) ** 2).reshape(len(batch), -1).sum(axis=1)))
    return np.concatenate(norms) if norms else np.zeros(0)


def dataset_recon_error(model: ModelState, samples: np.ndarray, batch_size: int = 256) -> float:
    """Dataset-level reconstruction error: mean over samples of per-sample MSE."""
    if len(samples) == 0:
        raise ValueError("dataset_recon_error needs at least one sample")
    return float(per_sample_mse(model, samples, batch_size).mean())
