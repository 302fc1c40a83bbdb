"""Canonical JSON serialization and content digests.

Every digest in the system is the SHA-256 hex of either raw bytes or the
canonical JSON form of a structure (sorted keys, compact separators,
UTF-8). Golden ledger tests compare these bytes, so the rules here must
never drift.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_text(text: str) -> str:
    return digest_bytes(text.encode("utf-8"))


def digest_json(value: Any) -> str:
    return digest_text(canonical_json(value))


def to_jsonable(value: Any) -> Any:
    """Best-effort conversion to JSON-serializable data.

    Objects may opt in by providing ``to_jsonable()``; containers are
    converted recursively. Anything else must already be JSON-safe.
    """
    if hasattr(value, "to_jsonable"):
        return value.to_jsonable()
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value
