"""Deterministic JSON and CSV writers for verification reports."""

from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def format_float(x: float) -> str:
    """Fixed 17-significant-digit text; non-finite values become JSON strings."""
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _scalar(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    return v


def _emit(v, out: io.StringIO, indent: int, level: int) -> None:
    import json

    v = _scalar(v)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if v is None:
        out.write("null")
    elif isinstance(v, bool):
        out.write("true" if v else "false")
    elif isinstance(v, int):
        out.write(str(v))
    elif isinstance(v, float):
        out.write(format_float(v))
    elif isinstance(v, str):
        out.write(json.dumps(v))
    elif isinstance(v, dict):
        if not v:
            out.write("{}")
            return
        out.write("{\n")
        items = list(v.items())
        for i, (k, x) in enumerate(items):
            out.write(pad + json.dumps(str(k)) + ": ")
            _emit(x, out, indent, level + 1)
            out.write(",\n" if i < len(items) - 1 else "\n")
        out.write(end + "}")
    elif isinstance(v, (list, tuple, np.ndarray)):
        seq = list(v)
        if not seq:
            out.write("[]")
            return
        if all(not isinstance(_scalar(x), (dict, list, tuple, np.ndarray)) for x in seq):
            out.write("[")
            for i, x in enumerate(seq):
                _emit(x, out, indent, level + 1)
                if i < len(seq) - 1:
                    out.write(", ")
            out.write("]")
            return
        out.write("[\n")
        for i, x in enumerate(seq):
            out.write(pad)
            _emit(x, out, indent, level + 1)
            out.write(",\n" if i < len(seq) - 1 else "\n")
        out.write(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with keys in insertion order and every float as '.17g'."""
    buf = io.StringIO()
    _emit(obj, buf, indent, 0)
    buf.write("\n")
    return buf.getvalue()


def write_json(path: Path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(x) if isinstance(x, (float, np.floating)) else str(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
