"""CSV output with a run manifest header.

Every file starts with ``#``-prefixed lines holding the manifest as JSON,
followed by an ordinary RFC-4180 CSV table.
"""
from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path as FilePath
from typing import Iterable, Sequence


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int | None
    version: str = field(default_factory=tool_version)
    outputs: list[str] = field(default_factory=list)
    results: dict = field(default_factory=dict)

    def header(self) -> str:
        body = json.dumps(asdict(self), sort_keys=True, default=_jsonable)
        return f"# qlab-manifest {body}\n"


def _jsonable(obj):
    if hasattr(obj, "to_config"):
        return obj.to_config()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def format_csv(columns: Sequence[str], rows: Iterable[Sequence], manifest: RunManifest | None = None) -> str:
    buf = io.StringIO()
    if manifest is not None:
        buf.write(manifest.header())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(target: str | FilePath | None, columns, rows, manifest: RunManifest | None = None) -> None:
    """Write to ``target`` or to stdout when ``target`` is ``None`` or ``"-"``."""
    text = format_csv(columns, rows, manifest)
    if target is None or str(target) == "-":
        sys.stdout.write(text)
    else:
        FilePath(target).write_text(text)


def read_csv(path: str | FilePath) -> tuple[dict | None, list[str], list[list[str]]]:
    """Return ``(manifest, header, rows)``; the manifest is ``None`` if absent."""
    manifest = None
    lines = []
    for line in FilePath(path).read_text().splitlines():
        if line.startswith("# qlab-manifest "):
            manifest = json.loads(line[len("# qlab-manifest "):])
        elif not line.startswith("#"):
            lines.append(line)
    rows = list(csv.reader(lines))
    return manifest, rows[0], rows[1:]
