"""
Named random sub-streams derived from one root seed.

Each component draws from its own `numpy.random.Generator`, keyed by a stable
name such as "model-init" or "attack:17", so any component can be reproduced
in isolation and parallel workers never share a stream.
"""
import zlib
from typing import Optional

import numpy as np

MODEL_INIT = "model-init"
RETRAIN_INIT = "retrain-init"
TRAIN_SHUFFLE = "train-shuffle"
AUGMENT_NOISE = "augment-noise"
AUGMENT_GEOMETRIC = "augment-geometric"
DATA_SUBSET = "data-subset"


def _name_key(name: str) -> int:
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(name.encode("utf-8"))


def seed_sequence(root_seed: int, name: str, index: Optional[int] = None) -> np.random.SeedSequence:
    """Build the SeedSequence for stream `name` (optionally indexed by sample)."""
    entropy = [int(root_seed) & 0xFFFFFFFF, _name_key(name)]
    if index is not None:
        entropy.append(int(index))
    return np.random.SeedSequence(entropy)


def stream(root_seed: int, name: str, index: Optional[int] = None) -> np.random.Generator:
    """
    Return a fresh generator for a named sub-stream.

    Args:
        root_seed: Root seed of the run
        name: Stream name, e.g. "model-init" or "attack"
        index: Optional sample index for per-sample streams

    Returns:
        A PCG64-backed generator that is identical for identical arguments
    """
    return np.random.default_rng(seed_sequence(root_seed, name, index))


def derive_seed(root_seed: int, name: str, index: Optional[int] = None) -> int:
    """Derive a plain 32-bit integer seed for components that store their seed."""
    return int(seed_sequence(root_seed, name, index).generate_state(1, dtype=np.uint32)[0])


def attack_stream_name(sample_index: int) -> str:
    return f"attack:{sample_index}"


def mine_stream_name(sample_index: int) -> str:
    return f"mine:{sample_index}"
