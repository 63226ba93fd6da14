"""
Output Writers for GyroLab

Full-precision CSV and JSON emission with atomic writes, and the run manifest
that records the resolved configuration, seeds, outputs and host metadata.
"""

import hashlib
import json
import logging
import math
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import psutil

from . import __version__

try:
    import cpuinfo
except ImportError:
    cpuinfo = None

logger = logging.getLogger("gyrolab.manifest")

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


def format_value(value: Any) -> str:
    """17 significant digits for floats; integers and strings as-is."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _replace_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_csv(path, header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write rows (mappings keyed by header) as CSV, atomically."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(row[col]) for col in header))
    _replace_atomic(path, "\n".join(lines) + "\n")
    logger.info(f"Wrote {len(lines) - 1} rows to {path}")
    return path


def write_columns(path, columns: Mapping[str, Sequence[Any]]) -> Path:
    """Write equal-length column arrays as CSV."""
    header = list(columns)
    lengths = {len(col) for col in columns.values()}
    if len(lengths) > 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    rows = ({name: columns[name][i] for name in header} for i in range(n))
    return write_csv(path, header, rows)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def write_json(path, obj: Any) -> Path:
    """Sorted-key JSON, NaN/inf written as null, atomically."""
    path = Path(path)
    _replace_atomic(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1024 * 1024), b""):
            digest.update(chunk)
    return digest.hexdigest()


def system_metadata() -> Dict[str, Any]:
    """Informational host description; never feeds back into results."""
    import scipy

    uname = platform.uname()
    cpu = uname.processor or uname.machine
    if cpuinfo is not None:
        try:
            cpu = cpuinfo.get_cpu_info().get("brand_raw", cpu)
        except Exception as e:
            logger.debug(f"cpuinfo lookup failed: {e}")
    return {
        "platform": platform.platform(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "cpu": cpu,
        "cpu_count": psutil.cpu_count(logical=True),
        "memory_total_gb": round(psutil.virtual_memory().total / (1024 ** 3), 2),
    }


def build_manifest(command: str, argv: Sequence[str], config: Mapping[str, Any],
                   outputs: Sequence[Path], seeds: Optional[Mapping[str, int]] = None,
                   results: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    files: List[Dict[str, str]] = []
    for out in outputs:
        out = Path(out)
        files.append({"path": out.name, "sha256": sha256_file(out)})
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "gyrolab",
        "tool_version": __version__,
        "command": command,
        "command_line": list(argv),
        "created_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "config": dict(config),
        "seeds": dict(seeds or {}),
        "outputs": files,
        "results": dict(results or {}),
        "system": system_metadata(),
    }


def write_manifest(out_dir, command: str, argv: Sequence[str], config: Mapping[str, Any],
                   outputs: Sequence[Path], seeds: Optional[Mapping[str, int]] = None,
                   results: Optional[Mapping[str, Any]] = None) -> Path:
    manifest = build_manifest(command, argv, config, outputs, seeds, results)
    path = write_json(Path(out_dir) / MANIFEST_NAME, manifest)
    logger.info(f"Wrote manifest {path}")
    return path
