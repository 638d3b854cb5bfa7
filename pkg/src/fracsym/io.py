"""CSV and plain-text report writers with deterministic formatting."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence], preamble: Sequence[str] = ()) -> Path:
    """Comment preamble (``# `` lines), a header row, then one line per row."""
    path = Path(path)
    lines = [f"# {line}".rstrip() for line in preamble]
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    """Return ``(preamble, columns, data)``; data is a float array (may be empty)."""
    pre, body = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            pre.append(line[2:] if line.startswith("# ") else line[1:])
        elif line:
            body.append(line)
    cols = body[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in body[1:]]) if len(body) > 1 else np.zeros((0, len(cols)))
    return pre, cols, data


def grid_rows(points: np.ndarray, *fields: np.ndarray):
    """Rows ``(x1..xN, field1, ...)`` in row-major node order."""
    for i in range(points.shape[0]):
        yield tuple(points[i]) + tuple(f[i] for f in fields)


def write_summary(path: str | Path, title: str, checks: Sequence[tuple[str, bool, str]],
                  info: Sequence[str], config_echo: Sequence[str]) -> Path:
    lines = [title, "=" * len(title), ""]
    for name, ok, detail in checks:
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    if not checks:
        lines.append("(no checks requested)")
    if info:
        lines += [""] + list(info)
    lines += ["", "resolved configuration:"] + [f"# {ln}".rstrip() for ln in config_echo]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
