"""
Unit tests for model specs, forward passes, training and on-disk storage.
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.config import ModelConfig, TrainConfig
from src.models.network import (
    ModelState,
    ae_forward,
    classifier_logits,
    dataset_recon_error,
    init_model,
    recon_loss,
    zero_model,
)
from src.models.specs import LayerSpec, ModelSpec
from src.models.training import train_model
from src.models.zoo import (
    create_conv_autoencoder_spec,
    create_dense_autoencoder_spec,
    create_sparse_autoencoder_spec,
    spec_from_config,
)
from src.persistence.datasets import Dataset, synth_images
from src.persistence.model_store import CHECKPOINT_NAME, SIDECAR_NAME, load_model, save_model
from src.utils.errors import CheckpointError, ConfigurationError, DatasetError, ShapeMismatchError

IMAGE_SHAPE = (1, 4, 4)


def linear_classifier(weights) -> ModelState:
    weights = np.asarray(weights, dtype=np.float64)
    spec = ModelSpec(
        kind="classifier",
        input_shape=[weights.shape[0]],
        layers=[LayerSpec(kind="dense", units=weights.shape[1])],
        num_classes=weights.shape[1],
    )
    model = zero_model(spec)
    model.params[0][...] = weights
    return model


# --- Specs ---


def test_dense_autoencoder_spec_round_trips_shape():
    spec = create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=5)
    assert spec.output_shape == IMAGE_SHAPE
    assert spec.latent_index() == 2
    assert [kind for kind, _ in spec.param_layout()] == ["dense"] * 4


def test_autoencoder_must_reproduce_its_input_shape():
    with pytest.raises(ValidationError):
        ModelSpec(kind="dense-ae", input_shape=[4], layers=[LayerSpec(kind="dense", units=3)])


def test_classifier_needs_matching_num_classes():
    with pytest.raises(ValidationError):
        ModelSpec(kind="classifier", input_shape=[4], layers=[LayerSpec(kind="dense", units=3)], num_classes=2)


def test_conv_autoencoder_reports_first_conv_layer():
    spec = create_conv_autoencoder_spec((1, 8, 8), filters=2, conv_layers=1)
    assert spec.first_conv_index() == 0
    assert spec.output_shape == (1, 8, 8)


def test_spec_from_config_maps_every_trainable_kind():
    assert spec_from_config(ModelConfig(kind="dense-ae", latent_dim=3), IMAGE_SHAPE).kind == "dense-ae"
    assert spec_from_config(ModelConfig(kind="sparse-ae", latent_dim=3), IMAGE_SHAPE).kind == "sparse-ae"
    assert spec_from_config(ModelConfig(kind="classifier", num_classes=3, hidden_units=4), IMAGE_SHAPE).kind == "classifier"


# --- Forward passes ---


def test_zero_dense_autoencoder_outputs_half(constant_ae, rng):
    x = rng.uniform(size=IMAGE_SHAPE)
    np.testing.assert_array_equal(ae_forward(constant_ae, x).values, np.full(IMAGE_SHAPE, 0.5))


def test_zero_conv_autoencoder_on_zero_image_outputs_half():
    model = zero_model(create_conv_autoencoder_spec((1, 8, 8), filters=2, conv_layers=1))
    np.testing.assert_array_equal(ae_forward(model, np.zeros((1, 8, 8))).values, np.full((1, 8, 8), 0.5))


def test_ae_forward_handles_batches(dense_ae, tiny_train):
    out = ae_forward(dense_ae, tiny_train.samples)
    assert out.shape == tiny_train.samples.shape
    assert np.all((out.values > 0.0) & (out.values < 1.0))


def test_ae_forward_rejects_wrong_shape(dense_ae):
    with pytest.raises(ShapeMismatchError):
        ae_forward(dense_ae, np.zeros((2, 2)))


def test_recon_loss_examples():
    assert recon_loss([0.2, 0.4], [0.2, 0.4]).item() == 0.0
    assert recon_loss([1.0, 0.0], [0.0, 0.0]).item() == 1.0
    assert recon_loss([1.0, 1.0], [0.0, 0.0]).item() == pytest.approx(math.sqrt(2.0))


def test_classifier_logits_examples():
    zero = linear_classifier(np.zeros((2, 2)))
    np.testing.assert_array_equal(classifier_logits(zero, [0.3, 0.9]).values, [0.0, 0.0])
    identity = linear_classifier(np.eye(2))
    np.testing.assert_array_equal(classifier_logits(identity, [3.0, 1.0]).values, [3.0, 1.0])


def test_classifier_logits_requires_classifier(dense_ae):
    with pytest.raises(ValueError):
        classifier_logits(dense_ae, np.zeros(IMAGE_SHAPE))


# --- Training ---


def test_training_reduces_loss_on_a_single_sample(tiny_train):
    single = tiny_train.subset([0])
    spec = create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=4)
    model = train_model(spec, single, TrainConfig(epochs=1, batch_size=1, lr=1e-2), seed=5)
    assert model.metadata.final_loss < model.metadata.initial_loss


def test_zero_epochs_keeps_initialization(tiny_train):
    spec = create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=4)
    model = train_model(spec, tiny_train, TrainConfig(epochs=0), seed=5)
    fresh = init_model(spec, seed=5)
    for a, b in zip(model.params, fresh.params):
        np.testing.assert_array_equal(a, b)


def test_training_is_deterministic(tiny_train):
    spec = create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=4)
    cfg = TrainConfig(epochs=2, batch_size=4)
    first, second = train_model(spec, tiny_train, cfg, seed=21), train_model(spec, tiny_train, cfg, seed=21)
    for a, b in zip(first.params, second.params):
        np.testing.assert_array_equal(a, b)
    assert first.metadata.loss_history == second.metadata.loss_history


def test_sparse_autoencoder_without_penalty_trains_like_the_dense_one(tiny_train):
    cfg = TrainConfig(epochs=3, batch_size=4, lr=1e-2)
    dense = train_model(create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=4), tiny_train, cfg, seed=13)
    sparse = train_model(create_sparse_autoencoder_spec(IMAGE_SHAPE, latent_dim=4, sparsity=0.0), tiny_train, cfg, seed=13)
    assert sparse.spec.kind == "sparse-ae"
    assert sparse.metadata.loss_history == dense.metadata.loss_history
    for a, b in zip(dense.params, sparse.params):
        np.testing.assert_array_equal(a, b)


def test_sparsity_penalty_changes_the_trajectory(tiny_train):
    cfg = TrainConfig(epochs=1, batch_size=4, lr=1e-2)
    dense = train_model(create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=4), tiny_train, cfg, seed=13)
    sparse = train_model(create_sparse_autoencoder_spec(IMAGE_SHAPE, latent_dim=4, sparsity=0.5), tiny_train, cfg, seed=13)
    assert sparse.metadata.loss_history != dense.metadata.loss_history


def test_training_loss_is_non_increasing_in_most_seeded_runs():
    """Full-batch Adam on a small dense autoencoder, 20 seeds, at least 18 monotone loss histories."""
    shape = (1, 6, 6)
    spec = create_dense_autoencoder_spec(shape, latent_dim=8)
    cfg = TrainConfig(epochs=8, batch_size=64, lr=5e-3)
    monotone = 0
    for seed in range(20):
        data = synth_images(64, shape, seed=100 + seed, num_classes=4)
        history = train_model(spec, data, cfg, seed=seed).metadata.loss_history
        monotone += all(b <= a for a, b in zip(history, history[1:]))
    assert monotone >= 18


def test_classifier_training_runs(tiny_train, classifier):
    model = train_model(classifier.spec, tiny_train, TrainConfig(epochs=3, batch_size=4, lr=1e-2), seed=2)
    assert model.metadata.final_loss < model.metadata.initial_loss


def test_training_rejects_mismatched_or_empty_data(tiny_train):
    spec = create_dense_autoencoder_spec((1, 2, 2), latent_dim=2)
    with pytest.raises(DatasetError):
        train_model(spec, tiny_train, TrainConfig(epochs=1), seed=0)
    empty = Dataset(np.zeros((0, 1, 2, 2)))
    with pytest.raises(DatasetError):
        train_model(spec, empty, TrainConfig(epochs=1), seed=0)


def test_statistics_networks_are_not_trained_here(tiny_train):
    spec = ModelSpec(kind="mine-statistics", input_shape=[4], layers=[LayerSpec(kind="dense", units=1)])
    with pytest.raises(ConfigurationError):
        train_model(spec, tiny_train, TrainConfig(epochs=1), seed=0)


# --- Storage ---


def test_save_and_load_round_trip(tmp_path, tiny_train):
    spec = create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=4)
    model = train_model(spec, tiny_train, TrainConfig(epochs=1, batch_size=4), seed=3)
    directory = save_model(model, tmp_path / "model")
    assert (directory / CHECKPOINT_NAME).exists() and (directory / SIDECAR_NAME).exists()

    loaded = load_model(directory)
    assert loaded.spec == model.spec
    assert loaded.metadata.final_loss == model.metadata.final_loss
    for a, b in zip(model.params, loaded.params):
        np.testing.assert_array_equal(a, b)
    assert dataset_recon_error(loaded, tiny_train.samples) == dataset_recon_error(model, tiny_train.samples)


def test_load_model_errors(tmp_path, dense_ae):
    with pytest.raises(CheckpointError):
        load_model(tmp_path / "missing")

    directory = save_model(dense_ae, tmp_path / "model")
    (directory / SIDECAR_NAME).write_text("spec = [", encoding="utf-8")
    with pytest.raises(CheckpointError):
        load_model(directory)


def test_load_model_rejects_layout_mismatch(tmp_path, dense_ae):
    directory = save_model(dense_ae, tmp_path / "model")
    other = init_model(create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=3), seed=1)
    save_model(other, tmp_path / "other")
    (directory / CHECKPOINT_NAME).write_bytes((tmp_path / "other" / CHECKPOINT_NAME).read_bytes())
    with pytest.raises(CheckpointError):
        load_model(directory)
