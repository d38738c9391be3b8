"""CSV/JSON artifacts and console tables.

Floats are written with ``repr`` so identical runs give byte-identical
files.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.table import Table

logger = logging.getLogger(__name__)

DISPLAY_DIGITS = 6


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, rows: Iterable[Mapping[str, Any]], fieldnames: Sequence[str]) -> Path:
    """Write rows with a header naming ``fieldnames`` in order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_cell(row.get(name)) for name in fieldnames])
    logger.debug(f"wrote {path}")
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return _cell(value)
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "tolist"):  # numpy scalars and arrays
        return _jsonable(value.tolist())
    return value


def write_summary_json(path: Path, summary: Mapping[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"wrote {path}")
    return path


def _display(value: Any) -> str:
    if isinstance(value, float) and math.isfinite(value):
        return f"{value:.{DISPLAY_DIGITS}g}"
    return _cell(value)


def render_table(
    console: Console,
    title: str,
    rows: Sequence[Mapping[str, Any]],
    fieldnames: Sequence[str],
) -> None:
    """Print rows as a rich table, numbers right-aligned."""
    table = Table(title=title, show_lines=False)
    for name in fieldnames:
        table.add_column(name, justify="right", no_wrap=True)
    for row in rows:
        table.add_row(*[_display(row.get(name)) for name in fieldnames])
    console.print(table)


def render_summary(console: Console, title: str, summary: Mapping[str, Any]) -> None:
    table = Table(title=title, show_header=False)
    table.add_column("key", style="bold")
    table.add_column("value")
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, (dict, list)):
            table.add_row(key, json.dumps(_jsonable(value)))
        else:
            table.add_row(key, _display(value))
    console.print(table)
