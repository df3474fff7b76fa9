"""Run results and their on-disk formats."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

FORMATS = ("csv", "structured", "both")


@dataclass
class Table:
    """Rows of values under ``columns``; each column name carries its unit
    as a suffix (``detuning_kHz``) or is dimensionless."""

    name: str
    columns: list[str]
    rows: list[tuple]
    description: str = ""

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"table {self.name}: row width {len(row)} != {len(self.columns)}")

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class RunOutput:
    experiment: str
    metadata: dict
    tables: dict[str, Table] = field(default_factory=dict)
    config_text: str = ""

    def add(self, table: Table) -> Table:
        self.tables[table.name] = table
        return table

    def to_document(self) -> dict:
        return {
            "metadata": _jsonable(self.metadata),
            "tables": {
                name: {"description": t.description, "columns": t.columns,
                       "rows": [[_jsonable(v) for v in r] for r in t.rows]}
                for name, t in self.tables.items()
            },
        }


def _jsonable(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):  # numpy scalar
        return _jsonable(v.item())
    return v


def _cell(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def structured_text(output: RunOutput) -> str:
    return json.dumps(output.to_document(), indent=2, allow_nan=False) + "\n"


def emit(output: RunOutput, fmt: str, path: str | Path) -> list[Path]:
    """Write the run's tables to directory ``path``; returns the files written.

    ``csv`` writes one comma-separated file per table plus the echoed config;
    ``structured`` writes a single JSON document; ``both`` does both.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def write(p: Path, text: str):
        p.write_text(text, encoding="utf-8", newline="")
        written.append(p)

    if fmt in ("csv", "both"):
        for table in output.tables.values():
            write(out / f"{table.name}.csv", table_csv(table))
        write(out / "config.yaml", output.config_text)
    if fmt in ("structured", "both"):
        write(out / "result.json", structured_text(output))
    return written
