"""Atomic file output: CSV tables with metadata comments, JSON documents, manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """JSON with sorted keys, so files are byte-stable across runs."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write(path, data: str | bytes) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def format_csv(columns: list[str], rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`format_csv` for numeric tables: ``(meta, columns, data)``."""
    meta, lines = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                meta[key] = json.loads(value)
            else:
                lines.append(line)
    columns = lines[0].strip().split(",")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.empty((0, len(columns)))
    return meta, columns, data


class OutputWriter:
    """Collects the files of one run and writes its manifest last."""

    def __init__(self, directory, fmt: str = "csv", meta: dict | None = None):
        self.directory = Path(directory)
        self.fmt = fmt
        self.meta = dict(meta or {})
        self.files: list[dict] = []

    def _record(self, path: Path):
        self.files.append(
            {
                "path": path.relative_to(self.directory).as_posix(),
                "sha256": sha256_file(path),
                "bytes": path.stat().st_size,
            }
        )
        return path

    def table(self, stem: str, columns: list[str], rows, meta: dict | None = None) -> Path:
        """A table as CSV (default) or as JSON ``{columns, rows, meta}``."""
        full_meta = {**self.meta, **(meta or {})}
        if self.fmt == "json":
            doc = {"columns": columns, "rows": [list(r) for r in rows], "meta": full_meta}
            return self._record(atomic_write(self.directory / f"{stem}.json", dumps(doc)))
        return self._record(
            atomic_write(self.directory / f"{stem}.csv", format_csv(columns, rows, full_meta))
        )

    def document(self, stem: str, doc: dict) -> Path:
        return self._record(atomic_write(self.directory / f"{stem}.json", dumps(doc)))

    def manifest(self, doc: dict, name: str = "manifest.json") -> Path:
        doc = dict(doc)
        doc["files"] = sorted(self.files, key=lambda f: f["path"])
        return atomic_write(self.directory / name, dumps(doc))
