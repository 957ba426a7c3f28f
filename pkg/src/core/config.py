"""
Configuration for uae-minmax.

Two layers:
  * `settings` - process-level settings from the environment / `.env`
    (pydantic-settings), e.g. log level and default output root.
  * `RunConfig` - the structured TOML document describing one run. Unknown
    keys are rejected, and the resolved document (every default filled in)
    is persisted next to the run's outputs so a run can be replayed exactly.
"""
import hashlib
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional, Union

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.utils.errors import ConfigurationError
from src.validation.validators import ValidationErrorDetail

logger = logging.getLogger(__name__)

ModelKind = Literal["dense-ae", "sparse-ae", "conv-ae", "classifier", "mine-statistics"]
SimilarityKind = Literal["mine", "l2-feature", "cosine-feature", "recon-l2"]
AugmentationMethod = Literal["mine-uae", "l2-uae", "gaussian", "flip", "rotation", "flip-rotation"]
BaseAugmentation = Literal["gaussian", "flip", "rotation", "flip-rotation"]


class Settings(BaseSettings):
    """Environment-level settings (prefix `UAE_`)."""

    LOG_LEVEL: str = "INFO"
    OUTPUT_ROOT: Path = Path("out")
    WORKERS: int = 1
    DEBUG: bool = False

    model_config = SettingsConfigDict(env_prefix="UAE_", env_file=".env", extra="ignore")


settings = Settings()


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


# --- Section models ---


class DataConfig(StrictModel):
    kind: Literal["idx", "csv", "synthetic"] = Field("synthetic", description="Dataset source")
    train_images: Optional[Path] = None
    train_labels: Optional[Path] = None
    test_images: Optional[Path] = None
    test_labels: Optional[Path] = None
    csv_train: Optional[Path] = None
    csv_test: Optional[Path] = None
    label_column: Optional[str] = None
    feature_columns: Optional[List[str]] = None
    n_train: int = Field(5000, gt=0, description="Training subset size")
    n_test: int = Field(1000, gt=0, description="Test subset size")
    image_shape: List[int] = Field(default_factory=lambda: [1, 28, 28], description="Synthetic image shape (C, H, W)")

    @model_validator(mode="after")
    def check_sources(self):
        if self.kind == "idx" and (self.train_images is None or self.test_images is None):
            raise ValueError("idx datasets need train_images and test_images")
        if self.kind == "csv" and (self.csv_train is None or self.csv_test is None):
            raise ValueError("csv datasets need csv_train and csv_test")
        return self


class ModelConfig(StrictModel):
    kind: ModelKind = "dense-ae"
    latent_dim: int = Field(128, gt=0)
    sparsity: float = Field(1e-5, ge=0.0, description="L1 latent penalty (sparse-ae only)")
    conv_filters: int = Field(16, gt=0)
    conv_layers: int = Field(2, gt=0)
    hidden_units: int = Field(128, gt=0, description="Classifier hidden width")
    classifier_conv: bool = Field(False, description="Give the classifier a leading conv layer")
    num_classes: int = Field(10, ge=2)
    checkpoint: Optional[Path] = Field(None, description="Load this model directory instead of training")


class TrainConfig(StrictModel):
    epochs: int = Field(20, ge=0)
    batch_size: int = Field(64, gt=0)
    optimizer: Literal["sgd", "adam"] = "adam"
    lr: float = Field(1e-3, gt=0.0)


class MineConfig(StrictModel):
    scheme: Literal["auto", "random", "conv"] = Field("auto", description="auto uses conv features when the model starts with conv2d")
    k: int = Field(500, gt=0, description="Number of compressed samples K")
    d_prime: int = Field(128, gt=0, description="Compressed length d'")
    hidden: List[int] = Field(default_factory=lambda: [100, 100])
    lr: float = Field(1e-4, gt=0.0)
    inner_steps: int = Field(10, ge=0, description="T_I ascent steps per attack iteration")
    warmup_steps: Optional[int] = Field(None, ge=0, description="Ascent steps before the first attack iteration (default T_I)")

    @field_validator("hidden")
    @classmethod
    def check_hidden(cls, v):
        if any(h <= 0 for h in v):
            raise ValueError("hidden widths must be positive")
        return v


class AttackConfig(StrictModel):
    alpha: float = Field(0.01, ge=0.0, description="Outer (delta) step size")
    beta: float = Field(0.1, ge=0.0, description="Inner (c) step size")
    iterations: int = Field(40, ge=0, description="T")
    epsilon: float = Field(1.0, gt=0.0, le=1.0, description="L-infinity bound")
    kappa: float = Field(0.0, ge=0.0)
    direction: Optional[Literal["maximize", "minimize"]] = Field(None, description="Default: maximize for supervised, minimize for unsupervised")
    similarity: SimilarityKind = "mine"
    c_max: float = Field(1e6, gt=0.0, description="Cap on the multiplier c")
    method: Literal["minmax", "penalty"] = "minmax"
    search_steps: int = Field(9, ge=1, description="B binary search steps (penalty)")
    search_iterations: int = Field(1000, ge=1, description="T' iterations per search step (penalty)")
    targeted: bool = False
    target_label: Optional[int] = Field(None, ge=0)
    seed: int = 0
    mine: MineConfig = Field(default_factory=MineConfig)


class AugmentationConfig(StrictModel):
    """The augmentation plan."""

    method: AugmentationMethod = "mine-uae"
    sigma: float = Field(0.01, ge=0.0)
    rotation_angle: float = 10.0
    horizontal_flip: bool = True
    vertical_flip: bool = True
    interpolation: Literal["nearest"] = "nearest"
    base: List[BaseAugmentation] = Field(default_factory=list, description="Conventional augmentations applied before training the original model")
    retrain_epoch_ratio: float = Field(1.5, gt=0.0)


class CalibrationConfig(StrictModel):
    """Gaussian MI calibration run (`mine-calibrate`)."""

    rho: float = Field(0.9, gt=-1.0, lt=1.0)
    dim: int = Field(20, gt=0)
    n: int = Field(5000, gt=1)
    steps: int = Field(5000, ge=1)
    batch_size: int = Field(256, gt=1)
    lr: float = Field(1e-3, gt=0.0)
    hidden: List[int] = Field(default_factory=lambda: [100, 100])
    repeats: int = Field(5, ge=1, description="Independent seeds; the median estimate is reported")


class SeedConfig(StrictModel):
    root: int = 0


class OutputConfig(StrictModel):
    root: Path = Field(default_factory=lambda: settings.OUTPUT_ROOT)
    record_wallclock: bool = True
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)
    plot: bool = True


class RunConfig(StrictModel):
    run_id: Optional[str] = None
    data: DataConfig = Field(default_factory=DataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    seeds: SeedConfig = Field(default_factory=SeedConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def fingerprint(self) -> str:
        """Stable short hash of the configuration content (run_id excluded)."""
        payload = self.model_dump(mode="json", exclude={"run_id"}, exclude_none=True)
        return hashlib.sha1(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:10]

    def resolved(self) -> "RunConfig":
        """Return a copy with every derived default made explicit."""
        cfg = self.model_copy(deep=True)
        if cfg.attack.direction is None:
            supervised = cfg.model.kind == "classifier"
            cfg.attack.direction = "maximize" if supervised else "minimize"
        if cfg.attack.mine.warmup_steps is None:
            cfg.attack.mine.warmup_steps = cfg.attack.mine.inner_steps
        if cfg.run_id is None:
            cfg.run_id = f"{cfg.model.kind}-{cfg.fingerprint()}"
        return cfg


# --- Loading and persistence ---


def _details_from(error: ValidationError) -> List[ValidationErrorDetail]:
    return [ValidationErrorDetail(loc=tuple(str(p) for p in err["loc"]), msg=err["msg"], type=err["type"]) for err in error.errors()]


def parse_run_config(data: dict) -> RunConfig:
    """
    Validate a config mapping.

    Raises:
        ConfigurationError: With one ValidationErrorDetail per problem
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError("Invalid run configuration", errors=_details_from(e))


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Load a RunConfig from a TOML document.

    Args:
        path: Path to the TOML file

    Returns:
        The validated (not yet resolved) configuration

    Raises:
        ConfigurationError: If the file is missing, unparsable or invalid
    """
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError("Config file not found", details={"path": str(path)})
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationError("Config file is not valid TOML", details={"path": str(path), "error": str(e)})
    logger.debug(f"Loaded config from {path}")
    return parse_run_config(raw)


def dump_run_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))


def write_resolved_config(cfg: RunConfig, path: Union[str, Path]) -> Path:
    """Persist the resolved configuration as TOML."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_run_config(cfg.resolved()), encoding="utf-8")
    logger.info(f"Resolved config written to {path}")
    return path
