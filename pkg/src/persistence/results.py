"""
CSV and text artifacts of attack and augmentation runs.

Floats are written with 17 significant digits so a CSV read back reproduces
the float64 values exactly. Ledgers are append-only CSV files with a fixed
header, shared by all runs under one output root.
"""
import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np

from src.attacks.types import TRACE_HEADER, AttackResult
from src.utils.errors import UAEError

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("sample_id", "success", "best_mi", "iters", "wallclock_ms")
ATTACK_LEDGER_HEADER = ("run_id", "method", "similarity", "samples", "asr", "mean_best_mi", "std_best_mi", "iterations", "wallclock_ms")
ATTACK_LEDGER = "attack-ledger.csv"
AUGMENT_LEDGER = "augment-ledger.csv"


def format_value(value: Any) -> str:
    """Render one CSV cell; floats use 17 significant digits, missing values are empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_table(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Plain CSV table with the same cell formatting as traces and summaries."""
    return _write_rows(Path(path), header, rows)


def write_trace(path: Union[str, Path], result: AttackResult) -> Path:
    """One row per attack iteration: t,f,c,mi,stationarity_sq."""
    return _write_rows(Path(path), TRACE_HEADER, (row.as_row() for row in result.trace))


def trace_filename(result: AttackResult) -> str:
    return f"{result.method}-sample-{result.sample_id if result.sample_id is not None else 0:05d}.csv"


def write_traces(directory: Union[str, Path], results: Sequence[AttackResult]) -> List[Path]:
    directory = Path(directory)
    return [write_trace(directory / trace_filename(r), r) for r in results]


def write_summary(path: Union[str, Path], results: Sequence[AttackResult], record_wallclock: bool = True) -> Path:
    """
    Batch summary: sample_id,success,best_mi,iters,wallclock_ms.

    `best_mi` is empty for failed samples; wall-clock is written as 0 when
    `record_wallclock` is False so re-runs produce identical files.
    """
    rows = (
        (r.sample_id, r.success, r.best_mi if r.success else None, r.iterations, r.wallclock_ms if record_wallclock else 0)
        for r in results
    )
    return _write_rows(Path(path), SUMMARY_HEADER, rows)


def read_csv_rows(path: Union[str, Path]) -> List[Dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise UAEError("Results file not found", details={"path": str(path)})
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# --- Ledgers ---


def append_ledger_row(path: Union[str, Path], header: Sequence[str], row: Mapping[str, Any]) -> Path:
    """
    Append one row to a ledger, writing the header when the file is new.

    Raises:
        UAEError: If an existing ledger has a different header
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not path.exists() or path.stat().st_size == 0
    if not new_file:
        with open(path, newline="") as f:
            existing = next(csv.reader(f), [])
        if tuple(existing) != tuple(header):
            raise UAEError("Ledger header mismatch", details={"path": str(path), "expected": list(header), "found": existing})
    with open(path, "a", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if new_file:
            writer.writerow(header)
        writer.writerow([format_value(row.get(key)) for key in header])
    logger.debug(f"Appended ledger row to {path}")
    return path


def attack_ledger_row(run_id: str, method: str, similarity: str, results: Sequence[AttackResult], record_wallclock: bool = True) -> Dict[str, Any]:
    mis = [r.best_mi for r in results if r.success and r.best_mi is not None]
    return {
        "run_id": run_id,
        "method": method,
        "similarity": similarity,
        "samples": len(results),
        "asr": sum(r.success for r in results) / len(results) if results else 0.0,
        "mean_best_mi": float(np.mean(mis)) if mis else None,
        "std_best_mi": float(np.std(mis)) if mis else None,
        "iterations": max((r.iterations for r in results), default=0),
        "wallclock_ms": sum(r.wallclock_ms for r in results) if record_wallclock else 0,
    }


# --- Key-value reports ---


def write_key_value_report(path: Union[str, Path], values: Mapping[str, Any]) -> Path:
    """Flat `key = value` text report, one entry per line in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for key, value in values.items():
            f.write(f"{key} = {format_value(value)}\n")
    return path


def read_key_value_report(path: Union[str, Path]) -> Dict[str, str]:
    values = {}
    with open(path) as f:
        for line in f:
            if " = " in line:
                key, value = line.rstrip("\n").split(" = ", 1)
                values[key] = value
    return values
