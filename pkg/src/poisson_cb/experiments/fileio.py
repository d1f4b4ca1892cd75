"""Readers and writers for counts, samples, design matrices, PGM images, CSV and JSON."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    pass


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            yield lineno, line.strip()


def read_counts(path) -> np.ndarray:
    """Newline-delimited nonnegative integers (blank lines ignored)."""
    vals = []
    for lineno, line in _lines(path):
        if not line:
            continue
        try:
            v = int(line)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: not an integer: {line!r}") from None
        if v < 0:
            raise ParseError(f"{path}:{lineno}: negative count {v}")
        vals.append(v)
    if not vals:
        raise ParseError(f"{path}: no counts found")
    return np.array(vals, dtype=np.float64)


def read_table(path, what: str = "row", widths=None) -> np.ndarray:
    """Whitespace- or comma-delimited rows of reals with a consistent width."""
    rows, width = [], None
    for lineno, line in _lines(path):
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        try:
            vals = [float(x) for x in parts]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed {what}: {line!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"{path}:{lineno}: non-finite value")
        if width is None:
            width = len(vals)
            if widths is not None and width not in widths:
                raise ParseError(f"{path}:{lineno}: expected {' or '.join(map(str, widths))} values")
        elif len(vals) != width:
            raise ParseError(f"{path}:{lineno}: expected {width} values, found {len(vals)}")
        rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: empty file")
    return np.array(rows, dtype=np.float64)


def read_samples(path) -> np.ndarray:
    x = read_table(path, "sample", widths=(1, 2))
    return x[:, 0] if x.shape[1] == 1 else x


def read_pgm(path) -> np.ndarray:
    """ASCII PGM (``P2``); pixel values are returned as counts."""
    tokens = []
    for lineno, line in _lines(path):
        body = line.split("#", 1)[0]
        tokens.extend((lineno, t) for t in body.split())
    if not tokens or tokens[0][1] != "P2":
        raise ParseError(f"{path}: not an ASCII PGM (missing P2 magic)")
    if len(tokens) < 4:
        raise ParseError(f"{path}: truncated header")
    try:
        w, h, maxval = (int(t) for _, t in tokens[1:4])
    except ValueError:
        raise ParseError(f"{path}:{tokens[1][0]}: malformed header") from None
    if w <= 0 or h <= 0 or maxval <= 0:
        raise ParseError(f"{path}: width, height and maxval must be positive")
    body = tokens[4:]
    if len(body) != w * h:
        raise ParseError(f"{path}: expected {w * h} pixels, found {len(body)}")
    vals = np.empty(w * h)
    for k, (lineno, t) in enumerate(body):
        try:
            v = int(t)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad pixel value {t!r}") from None
        if not 0 <= v <= maxval:
            raise ParseError(f"{path}:{lineno}: pixel value {v} outside [0, {maxval}]")
        vals[k] = v
    return vals.reshape(h, w)


def write_pgm(path, img) -> None:
    """Write an image as ASCII PGM, rounding to the nearest integer (display only)."""
    img = np.asarray(img, dtype=np.float64)
    q = np.rint(np.clip(img, 0.0, None)).astype(np.int64)
    maxval = max(int(q.max()), 1)
    h, w = q.shape
    out = io.StringIO()
    out.write(f"P2\n{w} {h}\n{maxval}\n")
    for row in q:
        out.write(" ".join(str(v) for v in row) + "\n")
    _write_text(path, out.getvalue())


def fmt(v) -> str:
    """Deterministic CSV cell text: shortest round-trip repr for floats."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    _write_text(path, csv_text(header, rows))


def write_json(path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_text(path, text: str) -> None:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
