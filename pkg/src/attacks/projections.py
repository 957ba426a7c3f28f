"""
Projections, the multiplier update and the stationarity measure.

All functions work on plain arrays outside the tape.
"""
import numpy as np


def project_box(delta: np.ndarray, x: np.ndarray, epsilon: float) -> np.ndarray:
    """
    Project delta onto [-epsilon, epsilon] intersected with [-x, 1 - x], elementwise.

    Same result as clipping delta to the ball and then x + delta to [0, 1], but
    without the add-then-subtract round trip, so |delta| <= epsilon and
    0 <= x + delta <= 1 hold exactly in floating point.
    """
    return np.clip(delta, np.maximum(-epsilon, -x), np.minimum(epsilon, 1.0 - x))


def project_c(c: float, c_max: float) -> float:
    return float(min(max(c, 0.0), c_max))


def c_update(c: float, t: int, beta: float, fplus: float, c_max: float = 1e6) -> float:
    """
    c_{t+1} = (1 - beta / t^(1/4)) * c_t + beta * f^+, clamped to [0, c_max].

    Raises:
        ValueError: If t < 1
    """
    if t < 1:
        raise ValueError(f"c_update needs t >= 1, got {t}")
    return project_c((1.0 - beta / t**0.25) * c + beta * fplus, c_max)


def stationarity(
    delta: np.ndarray,
    c: float,
    grad_delta: np.ndarray,
    grad_c: float,
    epsilon: float,
    x: np.ndarray,
    c_max: float = 1e6,
) -> float:
    """
    Squared norm of the projected-gradient residuals.

    ||delta - P_box(delta - grad_delta)||^2 + (c - P_[0, c_max](c + grad_c))^2,
    where grad_c = f^+(x + delta).
    """
    residual_delta = delta - project_box(delta - grad_delta, x, epsilon)
    residual_c = c - project_c(c + grad_c, c_max)
    return float(np.sum(residual_delta * residual_delta) + residual_c * residual_c)
