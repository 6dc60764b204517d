"""Deterministic JSON file I/O shared by pipeline, judging, and evaluation.

Every artifact this package writes is UTF-8 JSON with sorted keys, two-space
indentation, and a trailing newline, so that repeated runs over identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import SchemaViolation


def dump_canonical(payload: Any) -> str:
    """Render *payload* in the package's canonical JSON file form."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_canonical(payload), encoding="utf-8")


def read_json(path: Path, expected_schema: str | None = None) -> Any:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from exc
    if expected_schema is not None:
        if not isinstance(payload, dict):
            raise SchemaViolation(f"{path}: expected a JSON object")
        found = payload.get("schema")
        if found != expected_schema:
            raise SchemaViolation(
                f"{path}: expected schema {expected_schema!r}, found {found!r}"
            )
    return payload
