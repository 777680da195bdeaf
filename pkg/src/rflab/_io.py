"""Atomic file output.

Every run artifact (CSV, JSON) is written through these helpers: content is
staged to a temp file in the target directory and moved into place with
os.replace, so a crashed or interrupted run never leaves a truncated file.
Floats are serialized with repr() for exact round-tripping.
"""

from __future__ import annotations

import json
import os
import tempfile


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp.", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    # sort_keys keeps byte-identical output across runs
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
