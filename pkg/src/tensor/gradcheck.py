"""
Finite-difference gradient checking.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from src.tensor.tape import backward
from src.tensor.tensor import Tensor, parameter
from src.utils.errors import GradientError

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst_index: Tuple[int, ...]
    analytic: np.ndarray
    numeric: np.ndarray


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor), elementwise."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def finite_diff_check(
    function: Callable[[Tensor], Tensor],
    point: Union[Tensor, np.ndarray],
    h: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-3,
) -> GradCheckReport:
    """
    Compare the reverse-mode gradient of `function` at `point` to central differences.

    Args:
        function: Maps a tensor to a scalar tensor of shape (1,)
        point: Where to evaluate
        h: Finite-difference step
        tol: Maximum accepted relative error
        floor: Denominator floor so that near-zero gradients compare absolutely

    Returns:
        Report with pass flag, worst relative error and its index

    Raises:
        GradientError: If `function` does not return a scalar
    """
    base = np.array(point.values if isinstance(point, Tensor) else point, dtype=np.float64)
    x = parameter(base.copy())
    out = function(x)
    if out.shape != (1,):
        raise GradientError("finite_diff_check requires a scalar-valued function", {"shape": out.shape})
    analytic = backward(out, [x])[0] if out.requires_grad else np.zeros_like(base)

    numeric = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        shifted = base.copy()
        shifted[idx] += h
        f_plus = function(Tensor(shifted)).item()
        shifted[idx] -= 2.0 * h
        f_minus = function(Tensor(shifted)).item()
        numeric[idx] = (f_plus - f_minus) / (2.0 * h)

    errors = relative_error(analytic, numeric, floor)
    worst = np.unravel_index(int(np.argmax(errors)), base.shape) if errors.size else ()
    max_err = float(errors.max()) if errors.size else 0.0
    passed = max_err <= tol
    if not passed:
        logger.debug(f"Gradient check failed: max relative error {max_err:.3e} at {tuple(worst)}")
    return GradCheckReport(passed, max_err, tuple(int(i) for i in worst), analytic, numeric)
