"""
Architecture descriptors for the model zoo.

A `ModelSpec` is a flat list of `LayerSpec`s applied to a per-sample input
shape. Shape inference runs at validation time, so a spec that does not
compose (an autoencoder whose output differs from its input, a classifier
with the wrong number of logits) is rejected before any parameter exists.
"""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

LayerKind = Literal["dense", "conv2d", "relu", "sigmoid", "maxpool2", "upsample2", "flatten", "reshape"]
ModelKind = Literal["dense-ae", "sparse-ae", "conv-ae", "classifier", "mine-statistics"]

AUTOENCODER_KINDS = ("dense-ae", "sparse-ae", "conv-ae")
PARAMETRIC_LAYERS = ("dense", "conv2d")

Shape = Tuple[int, ...]


class LayerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: LayerKind
    units: Optional[int] = Field(None, gt=0, description="Output width (dense)")
    filters: Optional[int] = Field(None, gt=0, description="Output channels (conv2d)")
    kernel: int = Field(3, gt=0, description="Square kernel size (conv2d)")
    padding: Literal["same", "valid"] = "same"
    shape: Optional[List[int]] = Field(None, description="Target per-sample shape (reshape)")
    latent: bool = Field(False, description="This layer's output is the latent code")

    @model_validator(mode="after")
    def check_arguments(self):
        if self.kind == "dense" and self.units is None:
            raise ValueError("dense layer needs 'units'")
        if self.kind == "conv2d" and self.filters is None:
            raise ValueError("conv2d layer needs 'filters'")
        if self.kind == "reshape" and not self.shape:
            raise ValueError("reshape layer needs 'shape'")
        return self

    def output_shape(self, in_shape: Shape) -> Shape:
        """Per-sample output shape; raises ValueError when the input does not fit."""
        if self.kind == "dense":
            if len(in_shape) != 1:
                raise ValueError(f"dense expects a flat input, got {in_shape}")
            return (self.units,)
        if self.kind == "conv2d":
            if len(in_shape) != 3:
                raise ValueError(f"conv2d expects (C, H, W), got {in_shape}")
            _, h, w = in_shape
            if self.padding == "same":
                if self.kernel % 2 == 0:
                    raise ValueError("same padding needs an odd kernel")
                return (self.filters, h, w)
            if h < self.kernel or w < self.kernel:
                raise ValueError(f"kernel {self.kernel} larger than input {in_shape}")
            return (self.filters, h - self.kernel + 1, w - self.kernel + 1)
        if self.kind == "maxpool2":
            if len(in_shape) != 3 or in_shape[1] % 2 or in_shape[2] % 2:
                raise ValueError(f"maxpool2 expects (C, H, W) with even H and W, got {in_shape}")
            return (in_shape[0], in_shape[1] // 2, in_shape[2] // 2)
        if self.kind == "upsample2":
            if len(in_shape) != 3:
                raise ValueError(f"upsample2 expects (C, H, W), got {in_shape}")
            return (in_shape[0], in_shape[1] * 2, in_shape[2] * 2)
        if self.kind == "flatten":
            size = 1
            for s in in_shape:
                size *= s
            return (size,)
        if self.kind == "reshape":
            target = tuple(self.shape)
            size_in = size_out = 1
            for s in in_shape:
                size_in *= s
            for s in target:
                size_out *= s
            if size_in != size_out:
                raise ValueError(f"cannot reshape {in_shape} to {target}")
            return target
        return in_shape

    def param_shapes(self, in_shape: Shape) -> List[Shape]:
        if self.kind == "dense":
            return [(in_shape[0], self.units), (self.units,)]
        if self.kind == "conv2d":
            return [(self.filters, in_shape[0], self.kernel, self.kernel), (self.filters,)]
        return []


class ModelSpec(BaseModel):
    """
    Architecture of one model.

    Attributes:
        kind: Model family
        input_shape: Per-sample input shape, e.g. [1, 28, 28] or [784]
        layers: Layers applied in order
        latent_dim: Latent width for autoencoders (informational)
        sparsity: L1 coefficient on the latent activation (sparse-ae only)
        num_classes: Number of logits (classifier only)
    """

    model_config = ConfigDict(extra="forbid")

    kind: ModelKind
    input_shape: List[int] = Field(..., min_length=1)
    layers: List[LayerSpec] = Field(..., min_length=1)
    latent_dim: Optional[int] = Field(None, gt=0)
    sparsity: float = Field(0.0, ge=0.0)
    num_classes: Optional[int] = Field(None, ge=2)

    @model_validator(mode="after")
    def check_composition(self):
        if any(s <= 0 for s in self.input_shape):
            raise ValueError(f"input_shape must be positive, got {self.input_shape}")
        out = self.layer_shapes()[-1][1]
        if self.kind in AUTOENCODER_KINDS and out != tuple(self.input_shape):
            raise ValueError(f"autoencoder output shape {out} differs from input shape {tuple(self.input_shape)}")
        if self.kind == "classifier":
            if self.num_classes is None:
                raise ValueError("classifier needs num_classes")
            if out != (self.num_classes,):
                raise ValueError(f"classifier outputs {out}, expected ({self.num_classes},)")
        if self.kind == "mine-statistics" and out != (1,):
            raise ValueError(f"statistics network must output a scalar, got {out}")
        if self.sparsity > 0 and self.kind != "sparse-ae":
            raise ValueError("sparsity is only meaningful for sparse-ae")
        return self

    def layer_shapes(self) -> List[Tuple[Shape, Shape]]:
        """(input shape, output shape) for every layer."""
        shapes = []
        current: Shape = tuple(self.input_shape)
        for layer in self.layers:
            nxt = layer.output_shape(current)
            shapes.append((current, nxt))
            current = nxt
        return shapes

    @property
    def output_shape(self) -> Shape:
        return self.layer_shapes()[-1][1]

    def param_layout(self) -> List[Tuple[str, Shape]]:
        """(layer kind, shape) of every parameter tensor in order; weights precede biases."""
        layout = []
        for layer, (in_shape, _) in zip(self.layers, self.layer_shapes()):
            for shape in layer.param_shapes(in_shape):
                layout.append((layer.kind, shape))
        return layout

    def first_conv_index(self) -> Optional[int]:
        """Index of the first layer if it is a conv2d layer, else None."""
        return 0 if self.layers[0].kind == "conv2d" else None

    def latent_index(self) -> Optional[int]:
        for i, layer in enumerate(self.layers):
            if layer.latent:
                return i
        return None
