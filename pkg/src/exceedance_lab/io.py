"""Output formats: versioned CSV, canonical JSON, run manifests.

CSV files carry a schema comment line followed by an RFC-4180 body
(CRLF line endings, quoting only where needed). JSON is UTF-8 with sorted
keys; floats round-trip bit-exactly through ``repr``. Both are byte-stable
for fixed inputs, which is what the reproducibility guarantee rests on.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import time
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

try:
    from importlib.resources import files as _res_files
except ImportError:  # pragma: no cover
    _res_files = None

SCHEMA_HEADER = "# exceedance-lab schema v1"
MANIFEST_SCHEMA_VERSION = "1"


def csv_bytes(columns: Sequence[str], rows: Iterable[Sequence],
              config_hash: Optional[str] = None) -> bytes:
    buf = _io.StringIO()
    buf.write(SCHEMA_HEADER + "\r\n")
    if config_hash:
        buf.write(f"# config-hash: {config_hash}\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence],
              config_hash: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(csv_bytes(columns, rows, config_hash))
    return path


def read_csv(path):
    """Read a schema-v1 CSV; returns (columns, rows of strings)."""
    text = Path(path).read_bytes().decode("utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# exceedance-lab schema"):
        raise ValueError(f"{path}: missing schema header")
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    rows = list(csv.reader(body))
    return rows[0], rows[1:]


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(json_bytes(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_bytes().decode("utf-8"))


def config_hash(config: Mapping) -> str:
    """sha256 over the canonical JSON form of a resolved configuration.

    Path-like and parallelism fields must be stripped by the caller; the
    hash is meant to identify the scientific content of a run only.
    """
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def manifest_schema() -> dict:
    if _res_files is None:  # pragma: no cover
        raise RuntimeError("importlib.resources unavailable")
    text = (_res_files("exceedance_lab") / "schemas" / "manifest.schema.json").read_text()
    return json.loads(text)


def build_manifest(command: str, config: Mapping, cfg_hash: str, seed: int,
                   outputs: Sequence[str], wall_time_s: float,
                   backend: str, version: str) -> dict:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": command,
        "config": dict(config),
        "config_hash": cfg_hash,
        "seed": int(seed),
        "outputs": list(outputs),
        "wall_time_s": float(wall_time_s),
        "backend": backend,
        "package_version": version,
        "created_unix": time.time(),
    }


def validate_manifest(manifest: Mapping) -> None:
    """Raise jsonschema.ValidationError if the manifest is malformed."""
    import jsonschema
    jsonschema.validate(instance=manifest, schema=manifest_schema())
