"""Minimal reverse-mode autodiff over float64 NumPy arrays."""
from src.tensor.tensor import Node, Primitive, Tensor, as_tensor, parameter
from src.tensor import functional
from src.tensor.tape import Tape, backward
from src.tensor.optim import OptimizerState, optimizer_step
from src.tensor.gradcheck import GradCheckReport, finite_diff_check

__all__ = [
    "Node",
    "Primitive",
    "Tensor",
    "as_tensor",
    "parameter",
    "functional",
    "Tape",
    "backward",
    "OptimizerState",
    "optimizer_step",
    "GradCheckReport",
    "finite_diff_check",
]
