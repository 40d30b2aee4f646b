"""Serializers for CLI results: versioned JSON documents and CSV sweeps."""

import csv
import io
import json
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from loguru import logger
from pydantic import BaseModel

from anderson_lab.spectral import HeatmapRow

SCHEMA_VERSION = 1
HEATMAP_HEADER = ("t", "k", "lambda", "log_ipr")


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _g17(x: float) -> str:
    return format(float(x), ".17g")


class ReportWriter:
    """Writes one result document to a file or to stdout."""

    def __init__(self, out: Path | None = None):
        self.out = out
        logger.debug(f"ReportWriter initialized: out={out or 'stdout'}")

    def render_json(self, command: str, result: Any) -> str:
        document = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "result": _jsonable(result),
        }
        return json.dumps(document, indent=2) + "\n"

    def render_csv(self, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        """Floats are written with 17 significant digits, ints unchanged."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_g17(x) if isinstance(x, float) else x for x in row])
        return buffer.getvalue()

    def render_heatmap(self, rows: Iterable[HeatmapRow]) -> str:
        return self.render_csv(HEATMAP_HEADER, rows)

    def emit(self, text: str) -> None:
        """
        Write text to the configured path, or stdout when there is none.

        Raises:
            OSError: If the output file cannot be written
        """
        if self.out is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.out.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {len(text)} bytes to {self.out}")

    def write_json(self, command: str, result: Any) -> None:
        self.emit(self.render_json(command, result))

    def write_heatmap(self, rows: Iterable[HeatmapRow]) -> None:
        self.emit(self.render_heatmap(rows))
