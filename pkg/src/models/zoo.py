"""
Factory functions for the desk-scale architectures.
"""
from typing import Sequence

from src.core.config import ModelConfig
from src.models.specs import LayerSpec, ModelSpec


def _flat_size(shape: Sequence[int]) -> int:
    size = 1
    for s in shape:
        size *= s
    return size


def create_dense_autoencoder_spec(input_shape: Sequence[int], latent_dim: int = 128, sparsity: float = 0.0) -> ModelSpec:
    """
    One dense encoder layer and one dense decoder layer with a sigmoid output.

    A positive `sparsity` makes this a sparse-ae with an L1 penalty on the latent code.
    """
    d = _flat_size(input_shape)
    layers = [
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=latent_dim),
        LayerSpec(kind="relu", latent=True),
        LayerSpec(kind="dense", units=d),
        LayerSpec(kind="sigmoid"),
        LayerSpec(kind="reshape", shape=list(input_shape)),
    ]
    kind = "sparse-ae" if sparsity > 0 else "dense-ae"
    return ModelSpec(kind=kind, input_shape=list(input_shape), layers=layers, latent_dim=latent_dim, sparsity=sparsity)


def create_sparse_autoencoder_spec(input_shape: Sequence[int], latent_dim: int = 128, sparsity: float = 1e-5) -> ModelSpec:
    spec = create_dense_autoencoder_spec(input_shape, latent_dim, sparsity)
    # sparsity == 0 still yields a sparse-ae, matching dense-ae step for step
    return spec.model_copy(update={"kind": "sparse-ae"})


def create_conv_autoencoder_spec(input_shape: Sequence[int], filters: int = 16, conv_layers: int = 2) -> ModelSpec:
    """
    Encoder of conv+relu+pool blocks, decoder of conv+relu+upsample blocks and
    a final single-kernel-per-channel conv with sigmoid output.
    """
    if len(input_shape) != 3:
        raise ValueError(f"conv-ae needs a (C, H, W) input shape, got {list(input_shape)}")
    channels = input_shape[0]
    layers = []
    for i in range(conv_layers):
        layers += [
            LayerSpec(kind="conv2d", filters=filters),
            LayerSpec(kind="relu"),
            LayerSpec(kind="maxpool2", latent=(i == conv_layers - 1)),
        ]
    for _ in range(conv_layers):
        layers += [
            LayerSpec(kind="conv2d", filters=filters),
            LayerSpec(kind="relu"),
            LayerSpec(kind="upsample2"),
        ]
    layers += [LayerSpec(kind="conv2d", filters=channels), LayerSpec(kind="sigmoid")]
    return ModelSpec(kind="conv-ae", input_shape=list(input_shape), layers=layers)


def create_classifier_spec(
    input_shape: Sequence[int], num_classes: int = 10, hidden_units: int = 128, conv_filters: int = 0
) -> ModelSpec:
    """Small MLP classifier; `conv_filters > 0` prepends a conv+relu+pool block."""
    layers = []
    if conv_filters > 0:
        layers += [
            LayerSpec(kind="conv2d", filters=conv_filters),
            LayerSpec(kind="relu"),
            LayerSpec(kind="maxpool2"),
        ]
    layers += [
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=hidden_units),
        LayerSpec(kind="relu"),
        LayerSpec(kind="dense", units=num_classes),
    ]
    return ModelSpec(kind="classifier", input_shape=list(input_shape), layers=layers, num_classes=num_classes)


def create_statistics_net_spec(half_width: int, hidden: Sequence[int] = (100, 100)) -> ModelSpec:
    """MLP T(u, v) over the concatenated pair, i.e. input width 2 * half_width."""
    layers = []
    for width in hidden:
        layers += [LayerSpec(kind="dense", units=width), LayerSpec(kind="relu")]
    layers.append(LayerSpec(kind="dense", units=1))
    return ModelSpec(kind="mine-statistics", input_shape=[2 * half_width], layers=layers)


def spec_from_config(cfg: ModelConfig, input_shape: Sequence[int]) -> ModelSpec:
    """Build the ModelSpec a run config asks for."""
    if cfg.kind == "dense-ae":
        return create_dense_autoencoder_spec(input_shape, cfg.latent_dim)
    if cfg.kind == "sparse-ae":
        return create_sparse_autoencoder_spec(input_shape, cfg.latent_dim, cfg.sparsity)
    if cfg.kind == "conv-ae":
        return create_conv_autoencoder_spec(input_shape, cfg.conv_filters, cfg.conv_layers)
    if cfg.kind == "classifier":
        filters = cfg.conv_filters if cfg.classifier_conv else 0
        return create_classifier_spec(input_shape, cfg.num_classes, cfg.hidden_units, filters)
    raise ValueError(f"Model kind '{cfg.kind}' is not built from the model config")
