"""Model zoo: architecture specs, forward passes and training."""
from src.models.network import (
    ModelState,
    TrainingMetadata,
    ae_forward,
    classifier_logits,
    dataset_recon_error,
    forward,
    init_model,
    recon_loss,
    zero_model,
)
from src.models.specs import LayerSpec, ModelSpec
from src.models.training import train_model

__all__ = [
    "LayerSpec",
    "ModelSpec",
    "ModelState",
    "TrainingMetadata",
    "ae_forward",
    "classifier_logits",
    "dataset_recon_error",
    "forward",
    "init_model",
    "recon_loss",
    "train_model",
    "zero_model",
]
