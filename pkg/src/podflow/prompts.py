"""Prompt templates loaded from external sources at runtime.

Prompts never live in code. A store wraps one source — a single file, a
directory catalog, or a remote HTTP base — caches loaded templates, and
re-reads edited content only on an explicit ``reload()`` (remote sources
also expire on a TTL). Placeholder syntax is ``{{name}}`` with names
matching ``[a-z_][a-z0-9_]*``; no expressions, no conditionals.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping
from urllib.parse import urlparse

from .canonical import digest_text
from .errors import (
    ExtraVariable,
    MissingVariable,
    PromptNotFound,
    PromptPinMismatch,
    SourceUnreachable,
)

PLACEHOLDER_RE = re.compile(r"\{\{([a-z_][a-z0-9_]*)\}\}")
PROMPT_EXTENSION = ".md"

REMOTE_CACHE_TTL_S = 60.0


@dataclass(frozen=True)
class PromptRef:
    source: str  # file | directory_catalog | remote_http
    key: str
    version: str | None = None

    def __post_init__(self):
        if not self.key:
            raise ValueError("prompt key must be non-empty")


@dataclass(frozen=True)
class PromptTemplate:
    body: str
    placeholders: frozenset[str]
    loaded_from: str
    content_digest: str


def extract_placeholders(body: str) -> frozenset[str]:
    return frozenset(PLACEHOLDER_RE.findall(body))


def render_prompt(template: PromptTemplate, variables: Mapping[str, object], strict: bool = True) -> str:
    """Replace every placeholder with its variable's text form.

    Single-pass substitution: replacement text is never re-scanned, so a
    variable whose value contains ``{{...}}`` comes through literally.
    """
    missing = template.placeholders - set(variables)
    if missing:
        raise MissingVariable(sorted(missing)[0])
    if strict:
        extra = set(variables) - template.placeholders
        if extra:
            raise ExtraVariable(extra)
    return PLACEHOLDER_RE.sub(lambda m: str(variables[m.group(1)]), template.body)


class _FileSource:
    """One prompt file; its key is the file stem."""

    kind = "file"

    def __init__(self, path: Path):
        self.path = path

    def describe(self) -> str:
        return f"file:{self.path}"

    def reachable(self) -> bool:
        return self.path.is_file()

    def keys(self) -> list[str]:
        return [self.path.stem] if self.path.is_file() else []

    def read(self, key: str) -> str:
        if key != self.path.stem or not self.path.is_file():
            raise PromptNotFound(f"{key!r} not served by {self.describe()}")
        return self.path.read_text(encoding="utf-8")

    def read_resource(self, relpath: str) -> bytes:
        target = self.path.parent / relpath
        if not target.is_file():
            raise PromptNotFound(f"resource not found: {relpath}")
        return target.read_bytes()


class _DirectorySource:
    """One prompt per ``*.md`` file; key = relative path without extension."""

    kind = "directory_catalog"

    def __init__(self, root: Path):
        self.root = root

    def describe(self) -> str:
        return f"dir:{self.root}"

    def reachable(self) -> bool:
        return self.root.is_dir()

    def keys(self) -> list[str]:
        if not self.root.is_dir():
            raise SourceUnreachable(f"prompt directory missing: {self.root}")
        found = []
        for path in sorted(self.root.rglob(f"*{PROMPT_EXTENSION}")):
            found.append(str(path.relative_to(self.root))[: -len(PROMPT_EXTENSION)])
        return found

    def read(self, key: str) -> str:
        path = self.root / f"{key}{PROMPT_EXTENSION}"
        if not self.root.is_dir():
            raise SourceUnreachable(f"prompt directory missing: {self.root}")
        if not path.is_file():
            raise PromptNotFound(f"no prompt file for key {key!r} under {self.root}")
        return path.read_text(encoding="utf-8")

    def read_resource(self, relpath: str) -> bytes:
        target = self.root / relpath
        if not target.is_file():
            raise PromptNotFound(f"resource not found: {relpath}")
        return target.read_bytes()


class _RemoteHttpSource:
    """Prompts fetched from ``{base}/{key}.md`` with optional bearer auth."""

    kind = "remote_http"

    def __init__(self, base_url: str, token: str | None = None, client=None):
        if not urlparse(base_url).scheme:
            raise ValueError("remote prompt source needs an absolute URL base")
        self.base_url = base_url.rstrip("/")
        self.token = token
        if client is None:
            import httpx

            client = httpx.Client(timeout=10.0)
        self._client = client

    def describe(self) -> str:
        return f"http:{self.base_url}"

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def reachable(self) -> bool:
        try:
            response = self._client.get(self.base_url + "/", headers=self._headers())
        except Exception:
            return False
        return response.status_code < 500

    def keys(self) -> list[str]:
        # Remote catalogs are not enumerable; reload() works per-key.
        return []

    def read(self, key: str) -> str:
        url = f"{self.base_url}/{key}{PROMPT_EXTENSION}"
        try:
            response = self._client.get(url, headers=self._headers())
        except Exception as err:
            raise SourceUnreachable(f"prompt fetch failed: {url}: {err}") from err
        if response.status_code == 404:
            raise PromptNotFound(f"remote prompt not found: {url}")
        if response.status_code >= 400:
            raise SourceUnreachable(f"prompt fetch failed: {url}: HTTP {response.status_code}")
        return response.text

    def read_resource(self, relpath: str) -> bytes:
        url = f"{self.base_url}/{relpath}"
        try:
            response = self._client.get(url, headers=self._headers())
        except Exception as err:
            raise SourceUnreachable(f"resource fetch failed: {url}: {err}") from err
        if response.status_code >= 400:
            raise PromptNotFound(f"resource not found: {url}")
        return response.content


def _open_source(location: str, token: str | None = None):
    parsed = urlparse(str(location))
    if parsed.scheme in ("http", "https"):
        return _RemoteHttpSource(str(location), token=token)
    path = Path(location)
    if path.is_file():
        return _FileSource(path)
    return _DirectorySource(path)


class PromptStore:
    """Loads, caches, and hot-reloads prompt templates from one source.

    Cache entries for local sources live until ``reload()``; remote
    entries additionally expire after ``ttl_s``. Pinned loads (version =
    content digest) never expire and fail on mismatch. Lookups are safe
    for concurrent readers; entries are replaced atomically.
    """

    def __init__(self, location: str, token: str | None = None, ttl_s: float = REMOTE_CACHE_TTL_S, clock=time.monotonic):
        self._source = _open_source(location, token=token)
        self._ttl_s = ttl_s
        self._clock = clock
        self._lock = threading.Lock()
        self._cache: dict[tuple[str, str | None], tuple[PromptTemplate, float]] = {}
        self._seen_digests: dict[str, str] = {}

    @property
    def source_kind(self) -> str:
        return self._source.kind

    def describe_source(self) -> str:
        return self._source.describe()

    def reachable(self) -> bool:
        return self._source.reachable()

    def list_keys(self) -> list[str]:
        return self._source.keys()

    def _fresh(self, cached_at: float) -> bool:
        if self._source.kind != "remote_http":
            return True
        return (self._clock() - cached_at) < self._ttl_s

    def load(self, key: str, version: str | None = None) -> PromptTemplate:
        cache_key = (key, version)
        with self._lock:
            hit = self._cache.get(cache_key)
            if hit is not None and (version is not None or self._fresh(hit[1])):
                return hit[0]
        body = self._source.read(key)
        digest = digest_text(body)
        if version is not None and digest != version:
            raise PromptPinMismatch(f"prompt {key!r} digest {digest} does not match pin {version}")
        template = PromptTemplate(
            body=body,
            placeholders=extract_placeholders(body),
            loaded_from=f"{self._source.describe()}#{key}",
            content_digest=digest,
        )
        with self._lock:
            self._cache[cache_key] = (template, self._clock())
            self._seen_digests[key] = digest
        return template

    def load_ref(self, ref: PromptRef) -> PromptTemplate:
        if ref.source != self._source.kind:
            raise PromptNotFound(f"ref source {ref.source!r} but store serves {self._source.kind!r}")
        return self.load(ref.key, version=ref.version)

    def read_resource(self, relpath: str) -> bytes:
        """Raw sidecar files (e.g. JSON schemas) stored alongside prompts."""
        return self._source.read_resource(relpath)

    def reload(self) -> list[tuple[str, str, str]]:
        """Invalidate the cache and report content drift.

        Returns (key, old digest, new digest) for every previously seen
        key whose content changed. Unknown keys are not drift.
        """
        if not self._source.reachable():
            raise SourceUnreachable(f"prompt source unreachable: {self._source.describe()}")
        with self._lock:
            seen = dict(self._seen_digests)
            self._cache.clear()
        delta = []
        for key in sorted(seen):
            try:
                new_digest = digest_text(self._source.read(key))
            except PromptNotFound:
                continue
            if new_digest != seen[key]:
                delta.append((key, seen[key], new_digest))
                with self._lock:
                    self._seen_digests[key] = new_digest
        return delta
