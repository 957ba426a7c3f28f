"""
Attack success criteria.

Every criterion maps a perturbed sample to a scalar f; f <= 0 means the
attack succeeded. Supervised criteria are logit margins, the unsupervised
criterion compares reconstruction losses against the unperturbed sample.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Tuple

import numpy as np

from src.models.network import ModelState, ae_forward, classifier_logits, recon_loss
from src.tensor import Tensor, as_tensor, backward, parameter
from src.tensor import functional as F
from src.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

CriterionKind = Literal["sup-untargeted", "sup-targeted", "unsup-recon", "custom-loss"]


def _margin_parts(logits: Tensor, index: int, operation: str) -> Tuple[Tensor, Tensor]:
    logits = F.reshape(as_tensor(logits), (-1,))
    n = logits.shape[0]
    if n < 2:
        raise ShapeMismatchError(operation, "at least 2 classes", n)
    if not 0 <= index < n:
        raise ValueError(f"class index {index} out of range for {n} classes")
    others = [j for j in range(n) if j != index]
    return F.take(logits, [index]), F.max(F.take(logits, others))


def f_sup_untargeted(logits, y: int, kappa: float = 0.0) -> Tensor:
    """logit_y - max_{j != y} logit_j + kappa."""
    own, best_other = _margin_parts(logits, y, "f_sup_untargeted")
    return F.add(F.sub(own, best_other), kappa)


def f_sup_targeted(logits, target: int, kappa: float = 0.0) -> Tensor:
    """max_{j != target} logit_j - logit_target + kappa."""
    own, best_other = _margin_parts(logits, target, "f_sup_targeted")
    return F.add(F.sub(best_other, own), kappa)


def f_unsup(x, delta, model: ModelState, kappa: float = 0.0, baseline: Optional[float] = None) -> Tensor:
    """
    ||x - Phi(x + delta)||_2 - ||x - Phi(x)||_2 + kappa.

    Args:
        baseline: Cached ||x - Phi(x)||_2; computed when None
    """
    x, delta = as_tensor(x), as_tensor(delta)
    if x.shape != delta.shape:
        raise ShapeMismatchError("f_unsup", x.shape, delta.shape)
    if baseline is None:
        baseline = recon_loss(x, ae_forward(model, x)).item()
    perturbed = recon_loss(x, ae_forward(model, F.add(x, delta)))
    return F.add(perturbed, kappa - baseline)


def hinge(f: float) -> Tuple[float, bool]:
    """(max(f, 0), gate); the gate is closed (gradient zero) whenever f <= 0."""
    return (f, True) if f > 0 else (0.0, False)


@dataclass
class AttackCriterion:
    """
    A criterion bound to one reference sample.

    Attributes:
        kind: Criterion family
        kappa: Margin, >= 0
        model: Target model (classifier or autoencoder); None for custom-loss
        label: True label (sup-untargeted) or target label (sup-targeted)
        baseline: Cached ||x - Phi(x)||_2 (unsup-recon)
        loss_fn: Maps the perturbed sample tensor to a scalar tensor (custom-loss)
    """

    kind: CriterionKind
    kappa: float = 0.0
    model: Optional[ModelState] = None
    label: Optional[int] = None
    baseline: Optional[float] = None
    loss_fn: Optional[Callable[[Tensor], Tensor]] = None

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")

    @classmethod
    def untargeted(cls, model: ModelState, y: int, kappa: float = 0.0) -> "AttackCriterion":
        return cls("sup-untargeted", kappa, model, label=int(y))

    @classmethod
    def targeted(cls, model: ModelState, target: int, kappa: float = 0.0) -> "AttackCriterion":
        return cls("sup-targeted", kappa, model, label=int(target))

    @classmethod
    def unsupervised(cls, model: ModelState, x, kappa: float = 0.0) -> "AttackCriterion":
        x = as_tensor(x)
        baseline = recon_loss(x, ae_forward(model, x)).item()
        return cls("unsup-recon", kappa, model, baseline=baseline)

    @classmethod
    def custom(cls, loss_fn: Callable[[Tensor], Tensor], kappa: float = 0.0) -> "AttackCriterion":
        return cls("custom-loss", kappa, loss_fn=loss_fn)

    @property
    def supervised(self) -> bool:
        return self.kind in ("sup-untargeted", "sup-targeted")

    def evaluate(self, x_adv) -> Tensor:
        """Criterion value at the perturbed sample (differentiable in x_adv)."""
        x_adv = as_tensor(x_adv)
        if self.kind == "sup-untargeted":
            return f_sup_untargeted(classifier_logits(self.model, x_adv), self.label, self.kappa)
        if self.kind == "sup-targeted":
            return f_sup_targeted(classifier_logits(self.model, x_adv), self.label, self.kappa)
        if self.kind == "unsup-recon":
            raise ValueError("unsup-recon needs the reference sample; use value_and_grad or value_at")
        return F.add(self.loss_fn(x_adv), self.kappa)

    def _evaluate_delta(self, x: Tensor, delta: Tensor) -> Tensor:
        if self.kind == "unsup-recon":
            return f_unsup(x, delta, self.model, self.kappa, self.baseline)
        return self.evaluate(F.add(x, delta))

    def value_at(self, x, delta) -> float:
        return self._evaluate_delta(as_tensor(x), as_tensor(delta)).item()

    def value_and_grad(self, x, delta) -> Tuple[float, np.ndarray]:
        """f at x + delta and its gradient w.r.t. delta."""
        x = as_tensor(x).detach()
        d = parameter(as_tensor(delta).values)
        f = self._evaluate_delta(x, d)
        if not f.requires_grad:
            return f.item(), np.zeros(d.shape)
        (grad,) = backward(f, [d])
        return f.item(), grad

    def for_sample(self, x) -> Callable[[np.ndarray], float]:
        """Criterion as a function of the perturbed sample alone, for re-verification."""
        x_arr = np.asarray(as_tensor(x).values)
        return lambda x_adv: self.value_at(x_arr, np.asarray(x_adv) - x_arr)
