"""
Shared fixtures: tiny datasets, models and configs that keep every test fast.
"""
from pathlib import Path

import numpy as np
import pytest
import tomli_w

from src.core.config import AttackConfig, MineConfig
from src.models.network import init_model, zero_model
from src.models.zoo import create_classifier_spec, create_conv_autoencoder_spec, create_dense_autoencoder_spec
from src.persistence.datasets import synth_images

IMAGE_SHAPE = (1, 4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_train():
    return synth_images(12, IMAGE_SHAPE, seed=3, num_classes=3, split="train")


@pytest.fixture
def tiny_test():
    return synth_images(6, IMAGE_SHAPE, seed=4, num_classes=3, split="test")


@pytest.fixture
def dense_ae():
    return init_model(create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=6), seed=7)


@pytest.fixture
def constant_ae():
    """Autoencoder whose decoder ignores its input: Phi(.) = 0.5 everywhere."""
    return zero_model(create_dense_autoencoder_spec(IMAGE_SHAPE, latent_dim=6))


@pytest.fixture
def conv_ae():
    return init_model(create_conv_autoencoder_spec((1, 8, 8), filters=3, conv_layers=1), seed=8)


@pytest.fixture
def classifier():
    return init_model(create_classifier_spec(IMAGE_SHAPE, num_classes=3, hidden_units=8), seed=9)


@pytest.fixture
def small_mine():
    return MineConfig(scheme="random", k=16, d_prime=4, hidden=[8], lr=1e-3, inner_steps=2, warmup_steps=2)


@pytest.fixture
def small_attack(small_mine):
    return AttackConfig(alpha=0.05, beta=0.1, iterations=6, epsilon=1.0, mine=small_mine, search_steps=2, search_iterations=3)


def tiny_config_dict(tmp_path: Path, **overrides) -> dict:
    """A run config that trains and attacks in well under a second."""
    data = {
        "data": {"kind": "synthetic", "n_train": 8, "n_test": 4, "image_shape": list(IMAGE_SHAPE)},
        "model": {"kind": "dense-ae", "latent_dim": 4},
        "train": {"epochs": 1, "batch_size": 4},
        "attack": {
            "iterations": 5,
            "alpha": 0.05,
            "search_steps": 2,
            "search_iterations": 3,
            "mine": {"scheme": "random", "k": 8, "d_prime": 4, "hidden": [8], "inner_steps": 2},
        },
        "augmentation": {"method": "mine-uae"},
        "calibration": {"dim": 1, "n": 64, "steps": 5, "batch_size": 16, "hidden": [8], "repeats": 2},
        "seeds": {"root": 11},
        "output": {"root": str(tmp_path / "out"), "record_wallclock": False, "workers": 1, "plot": False},
    }
    for section, values in overrides.items():
        data.setdefault(section, {}).update(values)
    return data


@pytest.fixture
def write_config(tmp_path):
    """Write a tiny TOML run config; keyword arguments update whole sections."""

    def _write(name: str = "run.toml", **overrides) -> Path:
        path = tmp_path / name
        path.write_text(tomli_w.dumps(tiny_config_dict(tmp_path, **overrides)), encoding="utf-8")
        return path

    return _write
