"""
Exception hierarchy for uae-minmax.

Every error raised by the library derives from `UAEError`, which carries a
human-readable message plus a details dictionary that the CLI logs verbatim.
Failed attacks are never errors; they are reported through `AttackResult`.
"""
from typing import Any, Dict, Optional


class UAEError(Exception):
    """Base exception for all library errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self):
        if not self.details:
            return self.message
        detail_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"{self.message} ({detail_str})"


class ShapeMismatchError(UAEError, ValueError):
    """Raised when tensor or array shapes do not align."""

    def __init__(self, operation: str, expected: Any, actual: Any, details: Optional[Dict[str, Any]] = None):
        merged = {"operation": operation, "expected": expected, "actual": actual}
        merged.update(details or {})
        super().__init__(f"Shape mismatch in {operation}: expected {expected}, got {actual}", merged)
        self.operation = operation
        self.expected = expected
        self.actual = actual


class NumericalError(UAEError, ArithmeticError):
    """Raised when a NaN or Inf value crosses an operation boundary."""

    def __init__(self, op_name: str, node_id: Optional[int] = None, details: Optional[Dict[str, Any]] = None):
        merged = {"op": op_name, "node": node_id}
        merged.update(details or {})
        super().__init__(f"Non-finite value produced by '{op_name}'", merged)
        self.op_name = op_name
        self.node_id = node_id


class GradientError(UAEError):
    """Raised when a backward pass is requested on an invalid tape."""


class ConfigurationError(UAEError):
    """Raised for unreadable or invalid run configuration."""

    def __init__(self, message: str, errors: Optional[list] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.errors = errors or []

    def __str__(self):
        if not self.errors:
            return super().__str__()
        error_details = "\n".join(f"  - {e.loc}: {e.msg} ({e.type})" for e in self.errors)
        return f"{super().__str__()}\nDetails:\n{error_details}"


class DatasetError(UAEError):
    """Raised when a dataset cannot be loaded or is malformed."""


class IdxFormatError(DatasetError):
    """Raised for bad magic numbers, truncated payloads and oversized dimensions in IDX files."""


class CsvFormatError(DatasetError):
    """Raised for non-numeric cells and ragged rows in CSV files."""


class CheckpointError(UAEError):
    """Raised when a checkpoint file is malformed or does not match the model spec."""


class TrainingDivergenceError(UAEError):
    """Raised when the training loss becomes non-finite."""


class FeatureExtractionError(UAEError):
    """Raised when convolution features are requested from a model without a conv layer."""
