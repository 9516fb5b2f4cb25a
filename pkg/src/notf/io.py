"""Plain-text file formats.

Triple file
    Line 1 is a JSON header ``{"format": "notf-triples", "version": 1,
    "dims": [N1, N2, N3], "labels": [l1, l2, l3], "signed": false}`` where each
    ``l`` is a list of strings or null.  Every following non-blank line is
    ``i j k value`` (0-based indices, whitespace separated).  Unlisted
    entries are zero.  Records are written in canonical order (i fastest)
    and values with ``repr`` so that save/load is bit-exact.

Factor file
    Three blocks ``A``, ``B``, ``C``.  Each block starts with a line
    ``<name> <rows> <cols>`` followed by `rows` lines of `cols` values.
    Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tensor import FactorTriple

TRIPLE_FORMAT = "notf-triples"
FORMAT_VERSION = 1


class ParseError(ValueError):
    """Base class for file format errors; carries the 1-based line number."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class MalformedLineError(ParseError):
    pass


class IndexRangeError(ParseError):
    pass


class DuplicateKeyError(ParseError):
    pass


class NegativeValueError(ParseError):
    pass


class RankConsistencyError(ParseError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


# --- triple files -----------------------------------------------------------


def save_triples(path, t: np.ndarray, labels=None, signed: bool = False) -> Path:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError(f"expected a 3-mode tensor, got shape {t.shape}")
    if not signed and (t < 0).any():
        raise ValueError("negative entries need signed=True")
    labels = list(labels) if labels is not None else [None, None, None]
    header = {
        "format": TRIPLE_FORMAT,
        "version": FORMAT_VERSION,
        "dims": list(t.shape),
        "labels": [None if lab is None else [str(x) for x in lab] for lab in labels],
        "signed": bool(signed),
    }
    path = Path(path)
    # Fortran-order nonzero gives i fastest, matching the canonical layout
    flat = np.flatnonzero(t.ravel(order="F"))
    i, j, k = np.unravel_index(flat, t.shape, order="F")
    vals = t.ravel(order="F")[flat]
    lines = [json.dumps(header)]
    lines.extend(f"{a} {b} {c} {_fmt(v)}" for a, b, c, v in zip(i, j, k, vals))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_triple_header(path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    return _parse_header(path, first)


def _parse_header(path, line: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLineError(path, 1, f"header is not JSON ({exc.msg})") from None
    if not isinstance(header, dict) or header.get("format") != TRIPLE_FORMAT:
        raise MalformedLineError(path, 1, f"header must be a {TRIPLE_FORMAT!r} object")
    dims = header.get("dims")
    if not (isinstance(dims, list) and len(dims) == 3 and all(isinstance(d, int) and d > 0 for d in dims)):
        raise MalformedLineError(path, 1, f"dims must be three positive integers, got {dims!r}")
    labels = header.get("labels") or [None, None, None]
    if len(labels) != 3:
        raise MalformedLineError(path, 1, "labels must have one entry per mode")
    for d, lab in zip(dims, labels):
        if lab is not None and len(lab) != d:
            raise MalformedLineError(path, 1, "label list length does not match dims")
    header["labels"] = labels
    header.setdefault("signed", False)
    return header


def load_triples(path):
    """Read a triple file; returns ``(tensor, labels)``."""
    path = Path(path)
    with open(path) as fh:
        header = _parse_header(path, fh.readline())
        dims = tuple(header["dims"])
        signed = bool(header["signed"])
        t = np.zeros(dims)
        seen = set()
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise MalformedLineError(path, lineno, f"expected 'i j k value', got {line.strip()!r}")
            try:
                key = tuple(int(p) for p in parts[:3])
                value = float(parts[3])
            except ValueError:
                raise MalformedLineError(path, lineno, f"cannot parse {line.strip()!r}") from None
            if any(not 0 <= x < n for x, n in zip(key, dims)):
                raise IndexRangeError(path, lineno, f"index {key} outside dims {dims}")
            if key in seen:
                raise DuplicateKeyError(path, lineno, f"duplicate entry {key}")
            if not np.isfinite(value):
                raise MalformedLineError(path, lineno, f"non-finite value {parts[3]!r}")
            if value < 0 and not signed:
                raise NegativeValueError(path, lineno, f"negative value {value}")
            seen.add(key)
            t[key] = value
    return t, header["labels"]


def load_labels(path):
    """Per-mode labels from a triple file header or a JSON list of three lists."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        if isinstance(data, dict):
            data = data.get("labels")
        if not isinstance(data, list) or len(data) != 3:
            raise MalformedLineError(path, 1, "expected a list of three label lists")
        return data
    return read_triple_header(path)["labels"]


# --- factor files -----------------------------------------------------------


def save_factors(path, f: FactorTriple) -> Path:
    path = Path(path)
    lines = [f"# notf factors rank={f.rank}"]
    for name, m in zip("ABC", f):
        lines.append(f"{name} {m.shape[0]} {m.shape[1]}")
        lines.extend(" ".join(_fmt(v) for v in row) for row in m)
    path.write_text("\n".join(lines) + "\n")
    return path


def load_factors(path) -> FactorTriple:
    path = Path(path)
    rows = [
        (n, line.split())
        for n, line in enumerate(path.read_text().splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    pos = 0
    mats = []
    for name in "ABC":
        if pos >= len(rows):
            raise MalformedLineError(path, rows[-1][0] if rows else 1, f"missing block {name}")
        lineno, head = rows[pos]
        if len(head) != 3 or head[0] != name:
            raise MalformedLineError(path, lineno, f"expected '{name} <rows> <cols>'")
        try:
            nr, nc = int(head[1]), int(head[2])
        except ValueError:
            raise MalformedLineError(path, lineno, "block shape must be integers") from None
        if mats and nc != mats[0].shape[1]:
            raise RankConsistencyError(
                path, lineno, f"block {name} has {nc} columns, block A has {mats[0].shape[1]}"
            )
        pos += 1
        m = np.empty((nr, nc))
        for r in range(nr):
            if pos >= len(rows):
                raise MalformedLineError(path, rows[-1][0], f"block {name} ends early")
            lineno, vals = rows[pos]
            if len(vals) != nc:
                raise RankConsistencyError(path, lineno, f"row has {len(vals)} values, expected {nc}")
            try:
                m[r] = [float(v) for v in vals]
            except ValueError:
                raise MalformedLineError(path, lineno, "cannot parse row values") from None
            pos += 1
        mats.append(m)
    if pos != len(rows):
        raise MalformedLineError(path, rows[pos][0], "trailing content after block C")
    return FactorTriple(*mats)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path
