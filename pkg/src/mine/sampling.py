"""
Auxiliary sample construction for per-sample MINE.

A single pair (x, x + delta) gives no distribution to estimate from, so each
side is expanded into K compressed views: K seeded Gaussian projections
(`ProjectionBank`), or the K feature maps of a model's first convolution
layer. The same views are applied to x and x + delta.
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.models.network import ModelState
from src.tensor import Tensor, as_tensor
from src.tensor import functional as F
from src.utils.errors import ConfigurationError, FeatureExtractionError, ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectionBank:
    """
    K Gaussian matrices of shape (d', d), entries N(0, (1/d')^2).

    `matrices` is stored flattened as (K * d', d) so compression is a single
    matrix-vector product.
    """

    seed: int
    k: int
    d: int
    d_prime: int
    matrices: np.ndarray

    def matrix(self, index: int) -> np.ndarray:
        return self.matrices[index * self.d_prime : (index + 1) * self.d_prime]


def make_projection_bank(seed: int, d: int, d_prime: int, k: int) -> ProjectionBank:
    """
    Draw a projection bank deterministically from `seed`.

    Raises:
        ConfigurationError: If any dimension is not positive
    """
    if d <= 0 or d_prime <= 0 or k <= 0:
        raise ConfigurationError("Projection bank dimensions must be positive", details={"d": d, "d_prime": d_prime, "k": k})
    rng = np.random.default_rng(seed)
    matrices = rng.normal(0.0, 1.0 / d_prime, size=(k * d_prime, d))
    return ProjectionBank(seed, k, d, d_prime, matrices)


def compress(bank: ProjectionBank, x) -> Tensor:
    """
    Compressed views M_k x for k = 1..K, returned as a (K, d') tensor.

    Raises:
        ShapeMismatchError: If x does not have d entries
    """
    x = as_tensor(x)
    if x.size != bank.d:
        raise ShapeMismatchError("compress", bank.d, x.size)
    flat = F.reshape(x, (bank.d,))
    return F.reshape(F.matmul(bank.matrices, flat), (bank.k, bank.d_prime))


def conv_features(model: ModelState, x) -> Tensor:
    """
    Output of the model's first convolution layer, one flattened map per filter.

    Args:
        model: Model whose first layer is conv2d
        x: One sample of the model's input shape (C, H, W)

    Returns:
        (F, H' * W') tensor, F = filter count

    Raises:
        FeatureExtractionError: If the first layer is not a convolution
    """
    if model.spec.first_conv_index() is None:
        raise FeatureExtractionError("Model has no leading conv layer", {"model": model.spec.kind})
    x = as_tensor(x)
    shape = tuple(model.spec.input_shape)
    if x.size != int(np.prod(shape)):
        raise ShapeMismatchError("conv_features", shape, x.shape)
    layer = model.spec.layers[0]
    maps = F.conv2d(F.reshape(x, (1, *shape)), model.params[0], model.params[1], padding=layer.padding)
    filters = maps.shape[1]
    return F.reshape(maps, (filters, -1))


def conv_feature_width(model: ModelState) -> int:
    """Flattened length of one first-layer feature map."""
    (_, out_shape) = model.spec.layer_shapes()[0]
    return int(out_shape[1] * out_shape[2])
