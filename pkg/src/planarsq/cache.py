"""Optional on-disk cache for computed curves and tables.

Enabled only when ``PLANARSQ_CACHE_DIR`` is set. Entries are JSON files named
by a hash of (kind, identity, grid digest, solver version). Writes go to a
temporary file first and are renamed into place, so concurrent readers see
either the old file or the complete new one.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

ENV_VAR = "PLANARSQ_CACHE_DIR"


def _directory() -> Path | None:
    root = os.environ.get(ENV_VAR)
    return Path(root) if root else None


def _path(key: tuple, config) -> Path | None:
    root = _directory()
    if root is None:
        return None
    from .ground import SOLVER_VERSION

    raw = json.dumps([list(map(str, key)), config.digest(), SOLVER_VERSION])
    name = hashlib.sha256(raw.encode()).hexdigest()[:24]
    return root / f"{key[0]}-{name}.json"


def load(key: tuple, config):
    path = _path(key, config)
    if path is None or not path.exists():
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None  # treat a damaged entry as a miss


def store(key: tuple, config, payload) -> None:
    path = _path(key, config)
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
