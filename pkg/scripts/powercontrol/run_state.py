from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from importlib import metadata
from pathlib import Path
from typing import Any, Optional, Protocol

from scripts.numeric_common import format_number, parse_number

from .models import ResultSet

MANIFEST_NAME = "manifest.json"
EVENTS_NAME = "events.jsonl"
PACKAGE_NAME = "largecdma-upc"


class EventEmitter(Protocol):
    def emit(self, event_type: str, message: str, **extra: Any) -> None: ...


def safe_error_text(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def now_iso() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def run_stamp() -> str:
    return time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())


class EventSink:
    def __init__(self, path: Optional[Path], *, echo: bool = True) -> None:
        self.path = path
        self.echo = echo
        self.counts: dict[str, int] = {}

    def emit(self, event_type: str, message: str, **extra: Any) -> None:
        payload = {
            "time": now_iso(),
            "event": event_type,
            "message": message,
            **extra,
        }
        self.counts[event_type] = self.counts.get(event_type, 0) + 1
        if self.path is not None:
            line = json.dumps(payload, sort_keys=True, default=str)
            with self.path.open("a", encoding="utf-8") as f:
                f.write(line + "\n")
        if self.echo:
            print(f"[{payload['time']}] {event_type}: {message}")


def config_hash(config: dict[str, Any]) -> str:
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in (PACKAGE_NAME, "numpy", "scipy"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def make_run_dir(output_dir: Path, experiment: str, stamp: Optional[str] = None) -> Path:
    base = output_dir / experiment
    stamp = stamp or run_stamp()
    run_dir = base / stamp
    suffix = 1
    while run_dir.exists():
        run_dir = base / f"{stamp}-{suffix}"
        suffix += 1
    run_dir.mkdir(parents=True)
    return run_dir


def _table_columns(rows: list[dict[str, Any]]) -> list[str]:
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def write_table_csv(path: Path, columns: list[str], rows: list[dict[str, Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(row.get(c)) for c in columns])


def read_table_csv(path: Path) -> tuple[list[str], list[dict[str, Any]]]:
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise ValueError(f"empty result table: {path}") from None
        rows = [
            {c: (parse_number(cell) if cell != "" else None) for c, cell in zip(columns, record)}
            for record in reader
        ]
    return columns, rows


def write_result_set(result: ResultSet, run_dir: Path) -> Path:
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = dict(result.manifest)
    declared = dict(manifest.get("tables") or {})
    tables: dict[str, Any] = {}
    for name, rows in sorted(result.tables.items()):
        columns = list((declared.get(name) or {}).get("columns") or _table_columns(rows))
        file_name = f"{name}.csv"
        write_table_csv(run_dir / file_name, columns, rows)
        tables[name] = {"columns": columns, "file": file_name, "rows": len(rows)}
    manifest["tables"] = tables
    manifest.setdefault("experiment", result.experiment)
    (run_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    result.manifest = manifest
    result.run_dir = run_dir
    return run_dir


def load_result_set(run_dir: Path) -> ResultSet:
    manifest_path = run_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    tables_meta = manifest.get("tables")
    if not isinstance(tables_meta, dict):
        raise ValueError(f"Invalid manifest format: {manifest_path}")
    tables: dict[str, list[dict[str, Any]]] = {}
    for name, meta in tables_meta.items():
        _, rows = read_table_csv(run_dir / str(meta.get("file", f"{name}.csv")))
        tables[name] = rows
    return ResultSet(
        experiment=str(manifest.get("experiment", run_dir.parent.name)),
        tables=tables,
        manifest=manifest,
        run_dir=run_dir,
    )
