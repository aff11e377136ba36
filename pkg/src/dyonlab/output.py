"""Deterministic file writers: fixed 17-significant-digit floats, '\\n' line
endings, atomic write-then-rename."""
from __future__ import annotations

import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema

__all__ = ["fmt_float", "write_csv", "write_json", "dumps_json", "report_schema", "validate_report"]


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt_float(v)
    if hasattr(v, "dtype"):  # numpy scalar
        return _cell(v.item())
    return str(v)


def _atomic_write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return _atomic_write(path, "\n".join(lines) + "\n")


def _json(v, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(x, indent, level + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in v):
            return "[" + ", ".join(_json(x, indent, level + 1) for x in v) + "]"
        return "[\n" + ",\n".join(pad + _json(x, indent, level + 1) for x in v) + "\n" + end + "]"
    if hasattr(v, "dtype"):
        v = v.item()
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt_float(v) if math.isfinite(v) else "null"
    return json.dumps(v)


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with every float printed to 17 significant digits (non-finite as null)."""
    return _json(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    return _atomic_write(path, dumps_json(obj))


def report_schema() -> dict:
    text = resources.files("dyonlab").joinpath("schemas/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not follow the shipped schema."""
    jsonschema.validate(json.loads(dumps_json(report)), report_schema())
