"""CSV result files: atomic writes through pandas, `# ` summary lines, round-trip reads."""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Iterable, Mapping, Union

import pandas as pd

from .errors import ExportError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
COMMENT_PREFIX = "# "


def format_value(value: object) -> str:
    """Render a summary value the same way floats are rendered in the table."""
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def summary_lines(summary: Mapping[str, object]) -> list:
    return [f"{key}={format_value(value)}" for key, value in summary.items()]


def write_csv_atomic(
    frame: pd.DataFrame,
    destination: Union[str, Path],
    summary: Iterable[str] = (),
) -> Path:
    """Write ``frame`` plus ``# ``-prefixed summary lines, all or nothing."""
    path = Path(destination)
    tmp_path = path.with_name(f".{path.name}.tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp_path, "w", encoding="utf-8", newline="") as fh:
            frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            for line in summary:
                fh.write(f"{COMMENT_PREFIX}{line}\n")
        os.replace(tmp_path, path)
    except OSError as exc:
        try:
            tmp_path.unlink()
        except OSError:
            pass
        raise ExportError(path, exc.strerror or str(exc)) from exc

    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def read_csv(source: Union[str, Path]) -> pd.DataFrame:
    """Read a result file back, skipping summary lines."""
    return pd.read_csv(source, comment="#", float_precision="round_trip")


def read_summary(source: Union[str, Path]) -> dict:
    """Collect the ``# key=value`` lines of a result file."""
    summary = {}
    with open(source, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith(COMMENT_PREFIX) and "=" in line:
                key, _, value = line[len(COMMENT_PREFIX):].rstrip("\n").partition("=")
                summary[key] = value
    return summary
