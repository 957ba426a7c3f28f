"""
Independent validation of adversarial examples and structured documents.

The attack engine reports its own success flag; the functions here re-check
feasibility from scratch so callers (the augmentation pipeline, tests, the
CLI) never have to trust that flag.
"""
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.utils.errors import UAEError

# Predicates are checked exactly; callers may pass a slack for externally produced deltas.
FEASIBILITY_TOL = 0.0


# --- Validation Error ---


class ValidationErrorDetail(BaseModel):
    loc: Tuple[str, ...] = Field(..., description="Location of the error in the data structure")
    msg: str = Field(..., description="Error message")
    type: str = Field(..., description="Error type")


class FeasibilityError(UAEError):
    """Raised when an adversarial example claimed successful violates a constraint."""

    def __init__(self, message: str, errors: Optional[List[ValidationErrorDetail]] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.errors = errors or []

    def __str__(self):
        error_details = "\n".join([f"  - {e.loc}: {e.msg} ({e.type})" for e in self.errors])
        return f"{super().__str__()}\nDetails:\n{error_details}"


# --- Base Validator ---


def validate_data(data: Dict[str, Any], model_cls: type[BaseModel]) -> Tuple[bool, List[ValidationErrorDetail]]:
    """
    Validates dictionary data against a Pydantic model.

    Args:
        data: The dictionary data to validate.
        model_cls: The Pydantic model class to validate against.

    Returns:
        A tuple containing a boolean indicating validity and a list of validation errors (if any).
    """
    try:
        model_cls.model_validate(data)
        return True, []
    except ValidationError as e:
        errors = [ValidationErrorDetail(loc=tuple(str(p) for p in err["loc"]), msg=err["msg"], type=err["type"]) for err in e.errors()]
        return False, errors


# --- Adversarial example feasibility ---


def verify_adversarial_example(
    x: np.ndarray,
    delta: np.ndarray,
    epsilon: float,
    criterion: Union[float, Callable[[np.ndarray], float]],
    tol: float = FEASIBILITY_TOL,
) -> Tuple[bool, List[ValidationErrorDetail]]:
    """
    Check the three feasibility predicates of an adversarial example.

    Args:
        x: Original sample, values in [0, 1]
        delta: Perturbation, same shape as x
        epsilon: L-infinity bound
        criterion: Either the criterion value at x + delta, or a callable that
            evaluates the criterion on the perturbed sample
        tol: Absolute slack for the box and L-infinity checks

    Returns:
        (is_valid, errors)
    """
    x = np.asarray(x, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    errors: List[ValidationErrorDetail] = []

    if x.shape != delta.shape:
        errors.append(ValidationErrorDetail(loc=("delta",), msg=f"shape {delta.shape} differs from sample shape {x.shape}", type="shape_mismatch"))
        return False, errors

    perturbed = x + delta
    if perturbed.size and (perturbed.min() < -tol or perturbed.max() > 1.0 + tol):
        errors.append(
            ValidationErrorDetail(
                loc=("x_adv",),
                msg=f"perturbed sample leaves [0, 1] (min {perturbed.min():.6g}, max {perturbed.max():.6g})",
                type="box_violation",
            )
        )
    linf = float(np.abs(delta).max()) if delta.size else 0.0
    if linf > epsilon + tol:
        errors.append(ValidationErrorDetail(loc=("delta",), msg=f"L-infinity norm {linf:.6g} exceeds epsilon {epsilon:.6g}", type="linf_violation"))

    value = float(criterion(perturbed) if callable(criterion) else criterion)
    if not np.isfinite(value) or value > 0.0:
        errors.append(ValidationErrorDetail(loc=("criterion",), msg=f"criterion value {value:.6g} is positive", type="criterion_violation"))

    return len(errors) == 0, errors


def ensure_feasible(
    x: np.ndarray,
    delta: np.ndarray,
    epsilon: float,
    criterion: Union[float, Callable[[np.ndarray], float]],
    sample_id: Optional[int] = None,
) -> None:
    """
    Raise FeasibilityError unless `verify_adversarial_example` passes.
    """
    is_valid, errors = verify_adversarial_example(x, delta, epsilon, criterion)
    if not is_valid:
        raise FeasibilityError("Adversarial example failed re-verification", errors, {"sample_id": sample_id})
