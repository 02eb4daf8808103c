"""Deterministic JSON reports and CSV tables.

Floats are written with 17 significant digits; keys keep insertion order so that
identical inputs give byte-identical files. Run metadata lives in its own header.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
from pathlib import Path

import numpy as np

from .analysis import GeometryResult

REPORT_FORMAT = 1


def fmt(x: float) -> str:
    x = float(x) + 0.0  # no negative zero
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".16e")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def result_body(res: GeometryResult) -> dict:
    body = {
        "geometry": res.name,
        "mode": res.mode,
        "members": {k: v.as_dict() for k, v in res.members.items()},
        "differential": res.differential.as_dict(),
        "phi": res.phi,
        "reference": res.reference,
        "residual": res.residual,
        "relative_residual": res.relative_residual,
        "classification": res.classification,
        "classifier": res.classifier,
        "closure": res.closure.as_dict() if res.closure is not None else None,
        "proper_time": res.proper_times,
        "wavepacket": res.wavepacket,
        "warnings": list(res.warnings),
    }
    return body


def _version() -> str:
    from . import __version__
    return __version__


def metadata_header(config_text: str | None = None, command: str = "") -> dict:
    """Build-level information; contains no timestamps so reports stay reproducible."""
    head = {
        "format": REPORT_FORMAT,
        "package": "intphase",
        "version": _version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "command": command,
    }
    if config_text is not None:
        head["config_sha256"] = hashlib.sha256(config_text.encode()).hexdigest()
    return head


def write_report(path: str | Path | None, body: dict, header: dict) -> str:
    text = dumps({"metadata": header, "body": body})
    if path is not None:
        Path(path).write_text(text)
    return text


def write_csv(path: str | Path | None, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else ("" if x is None else x) for x in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
