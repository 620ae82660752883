"""Atomic file output and JSON schema validation."""
from __future__ import annotations

import json
import os
import tempfile
from functools import lru_cache
from importlib import resources

__all__ = ["atomic_write_bytes", "atomic_write_text", "write_json", "load_schema", "validate"]


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    ref = resources.files("iwasawa_cf") / "schemas" / f"{name}.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def validate(obj: dict, schema: str) -> None:
    import jsonschema

    jsonschema.validate(obj, load_schema(schema))


def write_json(path, obj: dict, schema: str | None = None) -> None:
    if schema is not None:
        validate(obj, schema)
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
