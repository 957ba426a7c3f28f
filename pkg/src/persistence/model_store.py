"""
On-disk model storage: an MMX1 checkpoint plus a TOML sidecar.

Directory layout:
    <dir>/model.mmx   parameters, one checkpoint entry per tensor
    <dir>/model.toml  ModelSpec and training metadata
"""
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Union

import numpy as np
import tomli_w

from src.models.network import ModelState, TrainingMetadata
from src.models.specs import ModelSpec
from src.tensor.checkpoint import read_checkpoint, write_checkpoint
from src.utils.errors import CheckpointError
from src.validation.validators import validate_data

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.mmx"
SIDECAR_NAME = "model.toml"


def save_model(state: ModelState, directory: Union[str, Path]) -> Path:
    """Write checkpoint and sidecar into `directory`; returns the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = [(kind, p) for (kind, _), p in zip(state.spec.param_layout(), state.params)]
    write_checkpoint(directory / CHECKPOINT_NAME, entries)

    meta = {k: v for k, v in state.metadata.__dict__.items() if v is not None}
    sidecar = {"spec": state.spec.model_dump(mode="json", exclude_none=True), "metadata": meta}
    (directory / SIDECAR_NAME).write_text(tomli_w.dumps(sidecar), encoding="utf-8")
    logger.info(f"Saved {state.spec.kind} model to {directory}")
    return directory


def load_model(directory: Union[str, Path]) -> ModelState:
    """
    Load a model saved by `save_model`.

    Raises:
        CheckpointError: If either file is missing, the sidecar is invalid, or
            the checkpoint does not match the ModelSpec parameter layout
    """
    directory = Path(directory)
    sidecar_path = directory / SIDECAR_NAME
    if not sidecar_path.exists():
        raise CheckpointError("Model sidecar not found", {"path": str(sidecar_path)})
    try:
        sidecar = tomllib.loads(sidecar_path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise CheckpointError("Model sidecar is not valid TOML", {"path": str(sidecar_path), "error": str(e)})

    is_valid, errors = validate_data(sidecar.get("spec", {}), ModelSpec)
    if not is_valid:
        raise CheckpointError("Model sidecar holds an invalid spec", {"errors": [f"{e.loc}: {e.msg}" for e in errors]})
    spec = ModelSpec.model_validate(sidecar["spec"])

    entries = read_checkpoint(directory / CHECKPOINT_NAME)
    layout = spec.param_layout()
    if [(k, tuple(a.shape)) for k, a in entries] != layout:
        raise CheckpointError(
            "Checkpoint does not match the model spec",
            {"expected": layout, "actual": [(k, tuple(a.shape)) for k, a in entries]},
        )
    meta = TrainingMetadata(**sidecar.get("metadata", {}))
    return ModelState(spec, [np.array(a) for _, a in entries], meta)
