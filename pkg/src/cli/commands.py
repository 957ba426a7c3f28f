"""
Subcommand implementations.

Every command resolves its config, creates `<output root>/<run id>/`, writes
`resolved-config.toml` there first and then its own artifacts. Commands
return normally on success and let library errors propagate to `run_command`.
"""
import argparse
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from src.attacks.batch import run_attack_batch
from src.attacks.types import AttackResult
from src.core.config import RunConfig, load_run_config, parse_run_config, write_resolved_config
from src.models.network import ModelState, dataset_recon_error, predict_labels
from src.models.specs import AUTOENCODER_KINDS
from src.models.training import train_model
from src.models.zoo import spec_from_config
from src.persistence import results as store
from src.persistence.datasets import Dataset, load_dataset
from src.persistence.model_store import load_model, save_model
from src.reporting.tables import build_report
from src.reporting.visualization import plot_mi_traces
from src.services.augmentation_service import AUGMENT_LEDGER_HEADER, AugmentationService
from src.services.diagnostics import compare_penalty, k_ablation, run_calibration, stationarity_diagnostic
from src.utils import seeding
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "resolved-config.toml"
K_ABLATION_HEADER = ("k", "mean_mi", "std_mi", "seconds")
STATIONARITY_HEADER = ("seed", "prefix_min_short", "prefix_min_long", "ratio")


# --- Config and run directory ---


def _set(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for key in keys[:-1]:
        data = data.setdefault(key, {})
    data[keys[-1]] = value


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Load the config file (or defaults) and apply command-line overrides."""
    cfg = load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    data = cfg.model_dump(mode="json", exclude_none=True)
    overrides = {
        "run_id": getattr(args, "run_id", None),
        "seeds.root": getattr(args, "seed", None),
        "output.root": getattr(args, "output", None),
        "output.workers": getattr(args, "workers", None),
        "attack.method": getattr(args, "method", None),
        "attack.iterations": getattr(args, "iterations", None),
        "augmentation.method": getattr(args, "augmentation", None),
    }
    for key, value in overrides.items():
        if value is not None:
            _set(data, key, str(value) if key == "output.root" else value)
    if getattr(args, "no_plot", False):
        _set(data, "output.plot", False)
    return parse_run_config(data).resolved()


def prepare_run_dir(cfg: RunConfig) -> Path:
    run_dir = Path(cfg.output.root) / cfg.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, run_dir / RESOLVED_CONFIG)
    return run_dir


def obtain_model(cfg: RunConfig, train: Dataset, run_dir: Path, progress: bool) -> ModelState:
    """Load `model.checkpoint` when set, otherwise train a fresh model and save it in the run directory."""
    if cfg.model.checkpoint is not None:
        model = load_model(cfg.model.checkpoint)
        if tuple(model.spec.input_shape) != train.sample_shape:
            raise ConfigurationError("Checkpoint input shape does not match the dataset", details={"model": model.spec.input_shape})
        return model
    spec = spec_from_config(cfg.model, train.sample_shape)
    model = train_model(spec, train, cfg.train, seeding.derive_seed(cfg.seeds.root, seeding.MODEL_INIT), progress=progress)
    save_model(model, run_dir / "model")
    return model


# --- train ---


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    run_dir = prepare_run_dir(cfg)
    train, test = load_dataset(cfg.data, cfg.seeds.root)
    spec = spec_from_config(cfg.model, train.sample_shape)
    model = train_model(spec, train, cfg.train, seeding.derive_seed(cfg.seeds.root, seeding.MODEL_INIT), progress=args.progress)
    save_model(model, run_dir / "model")

    report = {
        "run_id": cfg.run_id,
        "model": spec.kind,
        "train_samples": len(train),
        "epochs": model.metadata.epochs_run,
        "initial_train_loss": model.metadata.initial_loss,
        "final_train_loss": model.metadata.final_loss,
        "seed": model.metadata.seed,
    }
    if spec.kind in AUTOENCODER_KINDS:
        report["test_recon_error"] = dataset_recon_error(model, test.samples)
    else:
        report["test_accuracy"] = float((predict_labels(model, test.samples) == test.labels).mean())
    store.write_key_value_report(run_dir / "report.txt", report)
    logger.info(f"Model saved to {run_dir / 'model'}")
    return 0


# --- attack ---


def parse_split(text: str) -> Tuple[int, int]:
    """Parse "a,b" into (search steps, iterations per step)."""
    try:
        a, b = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b' with two integers, got '{text}'")
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError(f"both parts of '{text}' must be >= 1")
    return a, b


def attack_targets(args: argparse.Namespace, data: Dataset) -> List[int]:
    if args.sample:
        ids = sorted(set(args.sample))
        if ids[-1] >= len(data) or ids[0] < 0:
            raise ConfigurationError("Sample index out of range", details={"samples": len(data), "requested": ids})
        return ids
    return list(range(min(args.samples, len(data))))


def _write_cohort(run_dir: Path, cfg: RunConfig, label: str, method: str, results: List[AttackResult]) -> None:
    traces = run_dir / "traces" if label == method else run_dir / "traces" / label
    store.write_traces(traces, results)
    summary = "summary.csv" if label == method else f"summary-{label}.csv"
    store.write_summary(run_dir / summary, results, cfg.output.record_wallclock)
    row = store.attack_ledger_row(f"{cfg.run_id}:{label}", method, cfg.attack.similarity, results, cfg.output.record_wallclock)
    store.append_ledger_row(Path(cfg.output.root) / store.ATTACK_LEDGER, store.ATTACK_LEDGER_HEADER, row)


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    run_dir = prepare_run_dir(cfg)
    train, test = load_dataset(cfg.data, cfg.seeds.root)
    model = obtain_model(cfg, train, run_dir, args.progress)
    data = test if args.split == "test" else train
    ids = attack_targets(args, data)

    if args.compare_penalty:
        cohorts = compare_penalty(
            data.samples, data.labels, model, cfg.attack, cfg.seeds.root, args.compare_penalty, ids, cfg.output.workers, args.progress
        )
        for label, cohort in cohorts.items():
            _write_cohort(run_dir, cfg, label, cohort.method, cohort.results)
        all_results = {label: c.results for label, c in cohorts.items()}
        report = {"run_id": cfg.run_id, "samples": len(ids)}
        for label, cohort in cohorts.items():
            report[f"{label}.asr"] = cohort.asr
            report[f"{label}.mean_best_mi"] = cohort.mean_best_mi
    else:
        results = run_attack_batch(
            data.samples, data.labels, model, cfg.attack, cfg.seeds.root, ids, cfg.output.workers, progress=args.progress
        )
        _write_cohort(run_dir, cfg, cfg.attack.method, cfg.attack.method, results)
        all_results = {cfg.attack.method: results}
        successes = [r for r in results if r.success]
        report = {
            "run_id": cfg.run_id,
            "method": cfg.attack.method,
            "similarity": cfg.attack.similarity,
            "direction": cfg.attack.direction,
            "samples": len(results),
            "successes": len(successes),
            "asr": len(successes) / len(results) if results else 0.0,
        }

    store.write_key_value_report(run_dir / "report.txt", report)
    if cfg.output.plot:
        plot_mi_traces(all_results, run_dir / "mi_traces.png")
    return 0


# --- augment ---


def cmd_augment(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    run_dir = prepare_run_dir(cfg)
    train, test = load_dataset(cfg.data, cfg.seeds.root)
    if cfg.model.kind not in AUTOENCODER_KINDS:
        raise ConfigurationError("augment needs an autoencoder model kind", details={"kind": cfg.model.kind})

    service = AugmentationService(cfg, progress=args.progress)
    original = None
    if cfg.model.checkpoint is not None:
        original = load_model(cfg.model.checkpoint)
    report = service.run(train, test, spec_from_config(cfg.model, train.sample_shape), original)

    store.write_key_value_report(run_dir / "report.txt", report.as_row())
    store.append_ledger_row(Path(cfg.output.root) / store.AUGMENT_LEDGER, AUGMENT_LEDGER_HEADER, report.as_row())
    return 0


# --- mine-calibrate ---


def run_k_ablation(args: argparse.Namespace, cfg: RunConfig, run_dir: Path) -> None:
    """MI estimate against K on one training sample and a seeded perturbation; writes k-ablation.csv."""
    train, _ = load_dataset(cfg.data, cfg.seeds.root)
    if not 0 <= args.ablation_sample < len(train):
        raise ConfigurationError("Ablation sample index out of range", details={"sample": args.ablation_sample, "n": len(train)})
    x = train.samples[args.ablation_sample]
    scale = 0.1 * cfg.attack.epsilon
    delta = seeding.stream(cfg.seeds.root, "k-ablation-delta").uniform(-scale, scale, size=x.shape)
    rows = k_ablation(x, delta, cfg.attack.mine, ks=args.ks, steps=args.ablation_steps, repeats=args.ablation_repeats, seed=cfg.seeds.root)
    wallclock = cfg.output.record_wallclock
    store.write_table(
        run_dir / "k-ablation.csv",
        K_ABLATION_HEADER,
        ((row.k, row.mean_mi, row.std_mi, row.seconds if wallclock else 0) for row in rows),
    )


def run_stationarity(args: argparse.Namespace, cfg: RunConfig, run_dir: Path) -> dict:
    """Stationarity rate study; writes stationarity.csv and returns the report entries."""
    short, long = args.horizons
    if not 1 <= short <= long:
        raise ConfigurationError("Horizons must satisfy 1 <= short <= long", details={"short": short, "long": long})
    report = stationarity_diagnostic(
        seeds=args.stationarity_seeds,
        short_horizon=short,
        long_horizon=long,
        alpha=cfg.attack.alpha,
        beta=cfg.attack.beta,
        root_seed=cfg.seeds.root,
    )
    store.write_table(
        run_dir / "stationarity.csv",
        STATIONARITY_HEADER,
        zip(range(args.stationarity_seeds), report.prefix_min_short, report.prefix_min_long, report.ratios),
    )
    if not report.monotone:
        logger.error("Prefix-minimum stationarity increased between the short and long horizon")
    return {
        "stationarity.short_horizon": short,
        "stationarity.long_horizon": long,
        "stationarity.median_ratio": report.median_ratio,
        "stationarity.monotone": report.monotone,
    }


def cmd_mine_calibrate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    run_dir = prepare_run_dir(cfg)
    summary, results = run_calibration(cfg.calibration, cfg.seeds.root, progress=args.progress)
    report = summary.model_dump(exclude={"estimates", "seeds"})
    for r in results:
        report[f"estimate.seed_{r.seed}"] = r.estimate
    if args.k_ablation:
        run_k_ablation(args, cfg, run_dir)
    if args.stationarity:
        report.update(run_stationarity(args, cfg, run_dir))
    store.write_key_value_report(run_dir / "report.txt", report)
    return 0


# --- report ---


def cmd_report(args: argparse.Namespace) -> int:
    root = Path(args.ledger_dir) if args.ledger_dir else Path(resolve_config(args).output.root)
    text = build_report(root)
    if not text:
        raise ConfigurationError("No ledger found", details={"root": str(root)})
    (root / "report.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0
