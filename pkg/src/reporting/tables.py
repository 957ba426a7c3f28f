"""
Plain-text tables aggregated from the result ledgers.
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from src.persistence.results import ATTACK_LEDGER, AUGMENT_LEDGER, read_csv_rows

ATTACK_COLUMNS = (("run_id", "run"), ("method", "method"), ("similarity", "similarity"), ("samples", "n"), ("asr", "ASR"), ("mean_best_mi", "MI"))
AUGMENT_COLUMNS = (
    ("run_id", "run"),
    ("method", "method"),
    ("asr", "ASR"),
    ("original_test_error", "original"),
    ("retrained_test_error", "retrained"),
    ("improvement_pct", "improvement %"),
)


def _cell(key: str, value: Optional[str]) -> str:
    if value is None or value == "":
        return "-"
    if key == "asr":
        return f"{float(value) * 100:.2f}%"
    if key in ("mean_best_mi", "improvement_pct"):
        return f"{float(value):.2f}"
    if key.endswith("_error"):
        return f"{float(value):.5f}"
    return value


def render_table(rows: Sequence[Dict[str, str]], columns: Sequence[tuple], title: str) -> str:
    """Fixed-width table with a title line and a header rule."""
    header = [label for _, label in columns]
    body = [[_cell(key, row.get(key)) for key, _ in columns] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(header)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    out = [title, line(header), line(["-" * w for w in widths])]
    out.extend(line(r) for r in body)
    return "\n".join(out)


def build_report(root: Union[str, Path]) -> str:
    """
    Aggregate every ledger under `root` into one text report.

    Returns an empty string when no ledger exists.
    """
    root = Path(root)
    sections: List[str] = []
    if (root / ATTACK_LEDGER).exists():
        sections.append(render_table(read_csv_rows(root / ATTACK_LEDGER), ATTACK_COLUMNS, "Attack success rate and mean best MI"))
    if (root / AUGMENT_LEDGER).exists():
        sections.append(render_table(read_csv_rows(root / AUGMENT_LEDGER), AUGMENT_COLUMNS, "Test reconstruction error after augmentation"))
    return "\n\n".join(sections)
