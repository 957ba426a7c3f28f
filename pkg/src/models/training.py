"""
Training loops for autoencoders and classifiers.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from tqdm.auto import trange

from src.core.config import TrainConfig
from src.models.network import ModelState, TrainingMetadata, forward, init_params
from src.models.specs import AUTOENCODER_KINDS, ModelSpec
from src.persistence.datasets import Dataset
from src.tensor import OptimizerState, Tensor, backward, optimizer_step, parameter
from src.tensor import functional as F
from src.utils import seeding
from src.utils.errors import ConfigurationError, DatasetError, NumericalError, TrainingDivergenceError

logger = logging.getLogger(__name__)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of (N, C) logits against integer labels, max-shifted."""
    n, c = logits.shape
    shift = logits.values.max(axis=1, keepdims=True)
    shifted = F.sub(logits, shift)
    log_norm = F.log(F.sum(F.exp(shifted), axis=1))
    one_hot = np.zeros((n, c))
    one_hot[np.arange(n), labels] = 1.0
    correct = F.sum(F.mul(shifted, one_hot), axis=1)
    return F.mean(F.sub(log_norm, correct))


def batch_loss(spec: ModelSpec, params: Sequence[Tensor], samples: np.ndarray, labels: Optional[np.ndarray]) -> Tensor:
    """
    Training objective on one batch.

    Autoencoders: mean squared reconstruction error, plus sparsity times the
    mean absolute latent activation for a sparse-ae. Classifiers: cross-entropy.
    """
    out, latent = forward(spec, params, samples)
    if spec.kind in AUTOENCODER_KINDS:
        loss = F.mean(F.square(F.sub(out, samples)))
        if spec.kind == "sparse-ae" and spec.sparsity > 0 and latent is not None:
            loss = F.add(loss, F.mul(F.mean(F.abs(latent)), spec.sparsity))
        return loss
    if labels is None:
        raise DatasetError("Classifier training needs labels")
    return softmax_cross_entropy(out, labels)


def dataset_loss(spec: ModelSpec, params: List[np.ndarray], data: Dataset, batch_size: int = 256) -> float:
    """Sample-weighted training objective over the whole dataset."""
    tensors = [Tensor(p) for p in params]
    total = 0.0
    for start in range(0, len(data), batch_size):
        stop = min(start + batch_size, len(data))
        labels = data.labels[start:stop] if data.labels is not None else None
        total += batch_loss(spec, tensors, data.samples[start:stop], labels).item() * (stop - start)
    return total / len(data)


def train_model(
    spec: ModelSpec,
    data: Dataset,
    cfg: TrainConfig,
    seed: int,
    progress: bool = False,
) -> ModelState:
    """
    Train a model from a fresh initialization.

    Args:
        spec: Architecture (autoencoder or classifier)
        data: Training split, values in [0, 1]
        cfg: Epochs, batch size, optimizer and learning rate
        seed: Initialization seed; the shuffle order derives from it too
        progress: Show a progress bar over epochs

    Returns:
        The trained ModelState with initial/final loss and per-epoch history

    Raises:
        TrainingDivergenceError: If the loss or a gradient becomes non-finite
    """
    if spec.kind == "mine-statistics":
        raise ConfigurationError("Statistics networks are trained by the MINE estimator, not train_model")
    if len(data) == 0:
        raise DatasetError("Cannot train on an empty dataset")
    if data.sample_shape != tuple(spec.input_shape):
        raise DatasetError("Dataset shape does not match the model input", {"data": data.sample_shape, "model": tuple(spec.input_shape)})

    params = init_params(spec, np.random.default_rng(seed))
    shuffle_rng = seeding.stream(seed, seeding.TRAIN_SHUFFLE)
    opt = OptimizerState(kind=cfg.optimizer, lr=cfg.lr)
    initial_loss = dataset_loss(spec, params, data)
    history: List[float] = []
    logger.info(f"Training {spec.kind} on {len(data)} samples for {cfg.epochs} epochs (initial loss {initial_loss:.6g})")

    for epoch in trange(cfg.epochs, desc=f"train {spec.kind}", disable=not progress, leave=False):
        order = shuffle_rng.permutation(len(data))
        running = 0.0
        for start in range(0, len(data), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            labels = data.labels[idx] if data.labels is not None else None
            tensors = [parameter(p) for p in params]
            try:
                loss = batch_loss(spec, tensors, data.samples[idx], labels)
                grads = backward(loss, tensors)
            except NumericalError as e:
                raise TrainingDivergenceError(
                    "Training diverged", {"epoch": epoch + 1, "batch_start": start, "op": e.op_name, "node": e.node_id}
                )
            optimizer_step(opt, params, grads)
            running += loss.item() * len(idx)
        epoch_loss = running / len(data)
        history.append(epoch_loss)
        logger.debug(f"epoch {epoch + 1}/{cfg.epochs}: loss {epoch_loss:.6g}")

    final_loss = dataset_loss(spec, params, data) if cfg.epochs > 0 else initial_loss
    if not np.isfinite(final_loss):
        raise TrainingDivergenceError("Final training loss is not finite", {"loss": final_loss})
    logger.info(f"Finished training {spec.kind}: loss {initial_loss:.6g} -> {final_loss:.6g}")
    meta = TrainingMetadata(epochs_run=cfg.epochs, initial_loss=initial_loss, final_loss=final_loss, seed=seed, loss_history=history)
    return ModelState(spec, params, meta)
