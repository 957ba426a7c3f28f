"""
UAE data augmentation service.

Generates unsupervised adversarial examples (or conventional augmentations)
for a training split, builds the augmented set (originals followed by one
augmentation or copy per original), retrains from scratch and reports the
before/after reconstruction errors.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from pydantic import BaseModel, Field

from src.attacks.batch import build_criterion, run_attack_batch
from src.attacks.types import AttackResult
from src.core.config import AttackConfig, AugmentationConfig, RunConfig, TrainConfig
from src.models.network import ModelState, ae_forward, dataset_recon_error, per_sample_recon_norm
from src.models.specs import AUTOENCODER_KINDS, ModelSpec
from src.models.training import train_model
from src.persistence.datasets import Dataset
from src.utils import seeding
from src.utils.errors import ConfigurationError, DatasetError, ShapeMismatchError
from src.validation.validators import FeasibilityError, ensure_feasible

logger = logging.getLogger(__name__)

UAE_METHODS = ("mine-uae", "l2-uae")
GEOMETRIC_TRANSFORMS = ("hflip", "vflip", "rotation")


# --- Attack success rate ---


def asr(orig_losses: Sequence[float], adv_losses: Sequence[float], kappa: float = 0.0) -> float:
    """
    Fraction of samples whose adversarial loss is at most the original loss minus kappa.

    Raises:
        ShapeMismatchError: If the two sequences differ in length
    """
    orig, adv = np.asarray(orig_losses, dtype=np.float64), np.asarray(adv_losses, dtype=np.float64)
    if orig.shape != adv.shape:
        raise ShapeMismatchError("asr", orig.shape, adv.shape)
    if orig.size == 0:
        return 0.0
    return float(np.mean(adv <= orig - kappa))


def referenced_recon_norm(model: ModelState, originals: np.ndarray, perturbed: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """||x - Phi(x_adv)||_2 per sample, measured against the original x."""
    norms = []
    for start in range(0, len(originals), batch_size):
        x = originals[start : start + batch_size]
        recon = ae_forward(model, perturbed[start : start + batch_size]).values
        norms.append(np.sqrt(((x - recon) ** 2).reshape(len(x), -1).sum(axis=1)))
    return np.concatenate(norms) if norms else np.zeros(0)


# --- Conventional augmentation ---


def gaussian_augment(data: Dataset, sigma: float, seed: int) -> Dataset:
    """x + n with n ~ N(0, sigma^2 I), clipped to [0, 1]; sigma = 0 returns exact copies."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    noisy = data.samples + rng.normal(0.0, sigma, size=data.samples.shape) if sigma > 0 else data.samples.copy()
    return Dataset(np.clip(noisy, 0.0, 1.0), data.labels, data.split, f"{data.provenance}+gaussian(sigma={sigma})")


def _index_map(height: int, width: int, transform: str, angle: float = 0.0) -> np.ndarray:
    """
    Source pixel index for every output pixel, -1 where the output falls outside the image.

    The transform is applied by Pillow to an image of pixel indices, so every
    channel and dtype is moved exactly like nearest-neighbour resampling.
    """
    index = Image.fromarray(np.arange(height * width, dtype=np.int32).reshape(height, width))
    if transform == "hflip":
        moved = index.transpose(Image.Transpose.FLIP_LEFT_RIGHT)
    elif transform == "vflip":
        moved = index.transpose(Image.Transpose.FLIP_TOP_BOTTOM)
    elif transform == "rotation":
        moved = index.rotate(angle, resample=Image.Resampling.NEAREST, fillcolor=-1)
    else:
        raise ValueError(f"Unknown transform '{transform}'")
    return np.asarray(moved, dtype=np.int64)


def transform_image(sample: np.ndarray, transform: str, angle: float = 0.0) -> np.ndarray:
    """
    Apply one geometric transform to a (C, H, W) or (H, W) sample.

    Rotation is counter-clockwise by `angle` degrees about the image centre
    with nearest-neighbour interpolation; uncovered pixels become 0.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim not in (2, 3):
        raise DatasetError("Geometric augmentation needs image-shaped samples", {"shape": sample.shape})
    height, width = sample.shape[-2:]
    mapping = _index_map(height, width, transform, angle)
    flat = sample.reshape(*sample.shape[:-2], height * width)
    out = np.take(flat, np.clip(mapping, 0, None).ravel(), axis=-1).reshape(sample.shape)
    out[..., mapping < 0] = 0.0
    return out


def enabled_transforms(cfg: AugmentationConfig, method: Optional[str] = None) -> List[str]:
    """Transforms a method may draw from: flips for "flip", rotation for "rotation", all enabled otherwise."""
    method = method or cfg.method
    flips = [name for name, on in (("hflip", cfg.horizontal_flip), ("vflip", cfg.vertical_flip)) if on]
    if method == "flip":
        transforms = flips
    elif method == "rotation":
        transforms = ["rotation"]
    else:
        transforms = flips + ["rotation"]
    if not transforms:
        raise ConfigurationError("No geometric transform enabled", details={"method": method})
    return transforms


def geometric_augment(data: Dataset, cfg: AugmentationConfig, seed: int, method: Optional[str] = None) -> Dataset:
    """
    One randomly chosen geometric transform per sample.

    The transform is drawn uniformly among the enabled ones; rotations use an
    angle drawn uniformly from [-rotation_angle, rotation_angle].

    Raises:
        DatasetError: If the samples are not images
    """
    if len(data.sample_shape) not in (2, 3):
        raise DatasetError("Geometric augmentation needs image-shaped samples", {"shape": data.sample_shape})
    transforms = enabled_transforms(cfg, method)
    rng = np.random.default_rng(seed)
    out = np.empty_like(data.samples)
    for i, sample in enumerate(data.samples):
        transform = transforms[int(rng.integers(len(transforms)))]
        angle = float(rng.uniform(-cfg.rotation_angle, cfg.rotation_angle)) if transform == "rotation" else 0.0
        out[i] = transform_image(sample, transform, angle)
    return Dataset(out, data.labels, data.split, f"{data.provenance}+geometric({','.join(transforms)})")


# --- UAE generation ---


@dataclass
class UaeRecord:
    """Per-sample outcome of UAE generation."""

    sample_id: int
    attack_success: bool
    verified: bool
    original_loss: float
    adversarial_loss: float
    best_mi: Optional[float]
    wallclock_ms: float


@dataclass
class UaeSet:
    augmented: Dataset
    asr: float
    records: List[UaeRecord] = field(default_factory=list)
    results: List[AttackResult] = field(default_factory=list)


def uae_attack_config(attack: AttackConfig, method: str) -> AttackConfig:
    """Attack settings for UAE generation: kappa 0, minimize similarity, the method's objective."""
    if method not in UAE_METHODS:
        raise ConfigurationError(f"'{method}' is not a UAE method", details={"allowed": list(UAE_METHODS)})
    similarity = "mine" if method == "mine-uae" else "recon-l2"
    return attack.model_copy(update={"kappa": 0.0, "direction": "minimize", "similarity": similarity, "method": "minmax", "targeted": False})


def generate_uae_set(
    data: Dataset,
    model: ModelState,
    attack: AttackConfig,
    method: str = "mine-uae",
    root_seed: int = 0,
    workers: int = 1,
    progress: bool = True,
) -> UaeSet:
    """
    Attack every training sample and build the 2N augmented set.

    Successful samples contribute x + delta*, failed ones a copy of x. Each
    success is re-verified against the model before it is counted; the
    attack's own flag is never trusted on its own.

    Args:
        data: Training split only
        model: Trained autoencoder
        attack: Attack settings (kappa, direction and similarity are overridden per method)
        method: "mine-uae" or "l2-uae"
        root_seed: Root seed; sample i uses streams attack:i and mine:i
        workers: Attack worker processes

    Returns:
        UaeSet with the augmented dataset, ASR and per-sample records
    """
    if data.split != "train":
        raise DatasetError("UAE generation only reads the training split", {"split": data.split})
    if model.spec.kind not in AUTOENCODER_KINDS:
        raise ConfigurationError("UAE generation needs an autoencoder", details={"kind": model.spec.kind})
    cfg = uae_attack_config(attack, method)
    results = run_attack_batch(data.samples, None, model, cfg, root_seed, workers=workers, progress=progress)

    originals = data.samples
    adversarial = originals.copy()
    for r in results:
        if r.success:
            adversarial[r.sample_id] = originals[r.sample_id] + r.delta_star

    orig_losses = per_sample_recon_norm(model, originals)
    adv_losses = referenced_recon_norm(model, originals, adversarial)
    records = []
    for r in results:
        i = r.sample_id
        verified = False
        if r.success:
            # re-evaluated through the criterion the attack itself used
            criterion = build_criterion(model, originals[i], None, cfg)
            try:
                ensure_feasible(originals[i], r.delta_star, cfg.epsilon, criterion.for_sample(originals[i]), sample_id=i)
                verified = True
            except FeasibilityError as e:
                logger.error(f"UAE for sample {i} failed re-verification, using a copy: {[err.type for err in e.errors]}")
                adversarial[i] = originals[i]
        records.append(UaeRecord(i, r.success, verified, float(orig_losses[i]), float(adv_losses[i]), r.best_mi, r.wallclock_ms))

    successes = sum(rec.verified for rec in records)
    rate = successes / len(records) if records else 0.0
    augmented = data.concat(Dataset(adversarial, data.labels, "train", f"{method}"), provenance=f"{data.provenance}+{method}")
    logger.info(f"{method}: {successes}/{len(records)} verified UAEs (ASR {rate:.4f}), augmented set of {len(augmented)}")
    return UaeSet(augmented, rate, records, results)


# --- Retraining ---


class AugmentationReport(BaseModel):
    """Before/after comparison of one augmentation run."""

    run_id: str = Field(..., description="Run identifier")
    method: str = Field(..., description="Augmentation method")
    base: str = Field("", description="Conventional augmentations applied before the original training")
    asr: Optional[float] = Field(None, description="Attack success rate on the training set (UAE methods only)")
    original_train_loss: float
    retrained_train_loss: float
    original_test_error: float
    retrained_test_error: float
    improvement_pct: float = Field(..., description="(original - retrained) / original test error, in percent")
    train_samples: int
    augmented_samples: int
    original_epochs: int
    retrain_epochs: int
    generation_ms: float = 0.0
    retrain_ms: float = 0.0
    model_seed: int
    retrain_seed: int

    def as_row(self) -> Dict[str, object]:
        return self.model_dump()


AUGMENT_LEDGER_HEADER = tuple(AugmentationReport.model_fields.keys())


def improvement_pct(original: float, retrained: float) -> float:
    """Relative improvement in percent; NaN when the original error is 0."""
    if original == 0.0:
        return float("nan")
    return (original - retrained) / original * 100.0


def retrain_epochs(train: TrainConfig, ratio: float) -> int:
    return int(math.ceil(train.epochs * ratio))


def retrain_and_eval(
    original_train: Dataset,
    augmented: Dataset,
    test: Dataset,
    original_model: ModelState,
    spec: ModelSpec,
    train: TrainConfig,
    retrain_seed: int,
    run_id: str = "",
    method: str = "",
    epoch_ratio: float = 1.5,
    uae_asr: Optional[float] = None,
    generation_ms: float = 0.0,
    base: str = "",
    record_wallclock: bool = True,
    progress: bool = False,
) -> AugmentationReport:
    """
    Retrain from scratch on the augmented set and compare with the original model.

    The retrained model uses a fresh initialization seed and
    ceil(epochs * epoch_ratio) epochs. Both models are evaluated on the
    test split with the dataset-level reconstruction error.

    Raises:
        TrainingDivergenceError: If retraining diverges
    """
    if test.split != "test":
        raise DatasetError("Evaluation needs the test split", {"split": test.split})
    epochs = retrain_epochs(train, epoch_ratio)
    start = time.perf_counter()
    retrained = train_model(spec, augmented, train.model_copy(update={"epochs": epochs}), retrain_seed, progress=progress)
    retrain_ms = (time.perf_counter() - start) * 1000.0

    original_error = dataset_recon_error(original_model, test.samples)
    retrained_error = dataset_recon_error(retrained, test.samples)
    report = AugmentationReport(
        run_id=run_id,
        method=method,
        base=base,
        asr=uae_asr,
        original_train_loss=original_model.metadata.final_loss,
        retrained_train_loss=retrained.metadata.final_loss,
        original_test_error=original_error,
        retrained_test_error=retrained_error,
        improvement_pct=improvement_pct(original_error, retrained_error),
        train_samples=len(original_train),
        augmented_samples=len(augmented),
        original_epochs=original_model.metadata.epochs_run,
        retrain_epochs=epochs,
        generation_ms=generation_ms if record_wallclock else 0.0,
        retrain_ms=retrain_ms if record_wallclock else 0.0,
        model_seed=original_model.metadata.seed or 0,
        retrain_seed=retrain_seed,
    )
    logger.info(f"{method}: test error {original_error:.6g} -> {retrained_error:.6g} ({report.improvement_pct:+.2f}%)")
    return report


# --- Service ---


class AugmentationService:
    """
    Runs the full augmentation pipeline for one run config.

    Phases are strictly ordered: base augmentation, original training,
    augmentation generation, retraining and evaluation.
    """

    def __init__(self, config: RunConfig, progress: bool = True):
        self.config = config.resolved()
        self.root_seed = self.config.seeds.root
        self.progress = progress

    def _seed(self, name: str) -> int:
        return seeding.derive_seed(self.root_seed, name)

    def base_augmented(self, train: Dataset) -> Dataset:
        """Training set extended by each configured conventional augmentation."""
        aug = self.config.augmentation
        result = train
        for name in aug.base:
            if name == "gaussian":
                extra = gaussian_augment(train, aug.sigma, self._seed(f"{seeding.AUGMENT_NOISE}:base"))
            else:
                extra = geometric_augment(train, aug, self._seed(f"{seeding.AUGMENT_GEOMETRIC}:base"), method=name)
            result = result.concat(extra, provenance=f"{result.provenance}+{name}")
        return result

    def augment(self, train: Dataset, model: ModelState) -> Tuple[Dataset, Optional[float]]:
        """(augmented set of size 2N, ASR or None for non-attack methods)."""
        aug = self.config.augmentation
        if aug.method in UAE_METHODS:
            uae = generate_uae_set(
                train, model, self.config.attack, aug.method, self.root_seed, self.config.output.workers, self.progress
            )
            return uae.augmented, uae.asr
        if aug.method == "gaussian":
            extra = gaussian_augment(train, aug.sigma, self._seed(seeding.AUGMENT_NOISE))
        else:
            extra = geometric_augment(train, aug, self._seed(seeding.AUGMENT_GEOMETRIC))
        return train.concat(extra, provenance=f"{train.provenance}+{aug.method}"), None

    def run(self, train: Dataset, test: Dataset, spec: ModelSpec, original_model: Optional[ModelState] = None) -> AugmentationReport:
        """
        Execute the pipeline; `original_model` skips the original training when given.

        Raises:
            ConfigurationError: If the target model is not an autoencoder
        """
        if spec.kind not in AUTOENCODER_KINDS:
            raise ConfigurationError("Augmentation needs an autoencoder model", details={"kind": spec.kind})
        base_train = self.base_augmented(train)
        if original_model is None:
            original_model = train_model(spec, base_train, self.config.train, self._seed(seeding.MODEL_INIT), progress=self.progress)

        start = time.perf_counter()
        augmented, uae_asr = self.augment(base_train, original_model)
        generation_ms = (time.perf_counter() - start) * 1000.0

        return retrain_and_eval(
            base_train,
            augmented,
            test,
            original_model,
            spec,
            self.config.train,
            self._seed(seeding.RETRAIN_INIT),
            run_id=self.config.run_id,
            method=self.config.augmentation.method,
            epoch_ratio=self.config.augmentation.retrain_epoch_ratio,
            uae_asr=uae_asr,
            generation_ms=generation_ms,
            base="+".join(self.config.augmentation.base),
            record_wallclock=self.config.output.record_wallclock,
            progress=self.progress,
        )
