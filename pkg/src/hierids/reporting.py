"""Artifact writing: atomic files, config-echoed JSON and CSV.

Every artifact embeds the fully resolved run configuration (JSON documents
under a "config" key, CSV files as one leading comment line) so a run can
always be reproduced from its outputs. Writes go through a temp file and a
rename so concurrent stages never see partial output.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def to_jsonable(obj):
    """Recursively convert numpy containers/scalars to plain Python."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def atomic_write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path: str | Path, payload: dict, config: dict | None = None) -> Path:
    doc = dict(to_jsonable(payload))
    if config is not None:
        doc["config"] = to_jsonable(config)
    return atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_csv(path: str | Path, rows: list[list[str]], config: dict | None = None) -> Path:
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(to_jsonable(config), sort_keys=True))
    lines.extend(",".join(str(cell) for cell in row) for row in rows)
    return atomic_write_text(path, "\n".join(lines) + "\n")


def metric_table_csv(path: str | Path, tables: dict[str, "MetricTable"],
                     config: dict | None = None) -> Path:
    """Result-table layout: class rows then macro/weighted/accuracy rows,
    with a leading column naming the table when there are several."""
    multi = len(tables) > 1
    header = (["table"] if multi else []) + ["class", "precision", "recall", "f1", "support"]
    rows = [header]
    for name, table in tables.items():
        for row in table.csv_rows():
            rows.append(([name] if multi else []) + row)
    return write_csv(path, rows, config=config)
