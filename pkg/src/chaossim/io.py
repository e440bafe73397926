"""Config files, CSV tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

MANIFEST_NAME = "manifest.json"


def read_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def fmt(value) -> str:
    """CSV cell text; floats use the shortest round-trip repr."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if hasattr(value, "item"):
        return fmt(value.item())
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunWriter:
    """Stages tables for one output directory and publishes them with a manifest.

    Data files are written as ``*.partial``, the manifest (with row counts and
    digests) is written next, and only then are data files renamed into place.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.tables: dict = {}

    def add_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        self.tables[name] = (list(header), [list(r) for r in rows])

    def finalize(self, manifest: dict) -> dict:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        outputs = []
        staged = []
        for name, (header, rows) in self.tables.items():
            partial = self.out_dir / (name + ".partial")
            with open(partial, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                for row in rows:
                    writer.writerow([fmt(v) for v in row])
            sha = hashlib.sha256(partial.read_bytes()).hexdigest()
            outputs.append({"file": name, "rows": len(rows), "sha256": sha})
            staged.append((partial, self.out_dir / name))
        manifest = dict(manifest, outputs=outputs)
        (self.out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        for partial, final in staged:
            os.replace(partial, final)
        return manifest


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return json.loads(path.read_text(encoding="utf-8"))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
