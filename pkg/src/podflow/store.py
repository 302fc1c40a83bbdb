"""Content-addressed artifact store.

A flat local directory keyed by the SHA-256 hex digest of the stored
bytes. Writers stage into a temp file and rename into place, so
concurrent writers of identical content are safe and the operation is
idempotent.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .canonical import canonical_json, digest_bytes


@dataclass(frozen=True)
class ArtifactRef:
    """Pointer into the content store, as recorded in run ledgers."""

    name: str
    media_type: str
    location: str
    digest: str

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "media_type": self.media_type,
            "location": self.location,
            "digest": self.digest,
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "ArtifactRef":
        return cls(
            name=doc["name"],
            media_type=doc["media_type"],
            location=doc["location"],
            digest=doc["digest"],
        )


class ContentStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> str:
        """Store bytes, returning the digest key. Re-puts are no-ops."""
        key = digest_bytes(data)
        final = self.root / key
        if final.exists():
            return key
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, final)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return key

    def put_text(self, text: str) -> str:
        return self.put(text.encode("utf-8"))

    def put_json(self, value) -> str:
        return self.put_text(canonical_json(value))

    def get(self, key: str) -> bytes:
        return (self.root / key).read_bytes()

    def exists(self, key: str) -> bool:
        return (self.root / key).is_file()

    def path_for(self, key: str) -> Path:
        return self.root / key

    def add(self, name: str, media_type: str, data: bytes) -> ArtifactRef:
        key = self.put(data)
        return ArtifactRef(name=name, media_type=media_type, location=key, digest=key)
