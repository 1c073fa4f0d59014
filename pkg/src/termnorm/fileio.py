"""Atomic file writing and small JSON/JSONL helpers.

Writers emit to a temporary file in the destination directory and rename
into place, so a crash never leaves a partial artifact behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .errors import FileFormatError


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def dump_json(obj) -> str:
    """Canonical JSON: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dump_jsonl(rows) -> str:
    """One compact JSON object per line, key order as inserted."""
    return "".join(
        json.dumps(row, ensure_ascii=False, separators=(", ", ": ")) + "\n"
        for row in rows
    )


def read_jsonl(path):
    """Yield (line_number, parsed_object) pairs; malformed lines raise."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot read file: {exc}", path=path) from exc
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"invalid JSON: {exc.msg}", path=path,
                                  line=lineno) from exc
        if not isinstance(obj, dict):
            raise FileFormatError("each line must be a JSON object",
                                  path=path, line=lineno)
        yield lineno, obj


def read_json(path):
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot read file: {exc}", path=path) from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"invalid JSON: {exc.msg}", path=path,
                              line=exc.lineno) from exc
