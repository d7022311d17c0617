"""Byte-stable number formatting, atomic writes, config files and CSV tables."""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import UsageError
from .nonlin import NonlinearitySpec, Weight

DIGITS = 12


def fmt(x):
    """12 significant digits, lowercase exponent."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    return f"{x:.{DIGITS}g}"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, columns, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    for row in zip(*cols):
        lines.append(",".join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, columns, comments=()):
    atomic_write(path, csv_text(header, columns, comments))


def read_csv(path):
    """Returns ``(comments, header, data)`` with ``data`` shaped (rows, cols)."""
    comments, header, rows = [], None, []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif header is None:
                header = [h.strip() for h in line.split(",")]
            else:
                rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no header line")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return comments, header, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if not math.isfinite(x) else float(fmt(x))
    return obj


def report_text(doc):
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def write_report(path, doc):
    atomic_write(path, report_text(doc))


# --------------------------------------------------------------------------
# key = value metadata and config files
# --------------------------------------------------------------------------

def parse_config(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected 'key = value', got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key or not value:
                raise UsageError(f"{path}:{n}: malformed entry for key {key!r}")
            out[key.replace("-", "_")] = value
    return out


def encode_meta(tag, fields):
    parts = [tag]
    for key, value in fields.items():
        if isinstance(value, float):
            value = fmt(value)
        parts.append(f"{key}={value}")
    return " ".join(parts)


def decode_meta(line):
    tokens = line.split()
    return tokens[0], dict(t.split("=", 1) for t in tokens[1:] if "=" in t)


def spec_fields(spec):
    out = {"k": float(spec.k), "p": float(spec.p), "N": int(spec.N),
           "psi": spec.psi.describe(), "fsign": spec.fsign}
    if spec.constant_a is not None:
        out["constant_a"] = float(spec.constant_a)
    return out


def spec_from_fields(d):
    ca = d.get("constant_a")
    return NonlinearitySpec(k=float(d["k"]), p=float(d["p"]), psi=Weight.parse(d["psi"]),
                            fsign=d["fsign"], N=int(d["N"]),
                            constant_a=None if ca is None else float(ca))


# --------------------------------------------------------------------------
# parallelism
# --------------------------------------------------------------------------

def thread_count():
    """Worker cap from ``QUASISYM_THREADS`` (unset or 0 means automatic)."""
    raw = os.environ.get("QUASISYM_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"QUASISYM_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise UsageError(f"QUASISYM_THREADS must be >= 0, got {n}")
    return n if n > 0 else min(8, os.cpu_count() or 1)


def pmap(fn, items):
    """Ordered map over ``items`` on at most :func:`thread_count` threads."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
