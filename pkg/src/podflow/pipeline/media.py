"""Media synthesis backends: deterministic stubs plus HTTP adapter shapes.

Rendering never involves model reasoning — these are pure function
steps. The stubs write placeholder artifacts whose bytes embed the
digest of what they were asked to render, so identical inputs always
yield identical artifacts. The HTTP adapters document the wire shape for
real services and are not verified against live endpoints.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..canonical import canonical_json, digest_json, digest_text
from ..errors import BackendRejectedSpec, BackendUnavailable, PodflowError
from ..store import ArtifactRef, ContentStore
from .veo import VeoSpec

AUDIO_ARTIFACT = "audio.mp3"
VIDEO_ARTIFACT = "video.mp4"


@dataclass
class StubTtsBackend:
    faults: deque = field(default_factory=deque)

    def synthesize(self, script: str) -> bytes:
        if self.faults:
            raise self.faults.popleft()
        payload = {"kind": "stub-audio", "script_digest": digest_text(script)}
        return canonical_json(payload).encode("utf-8")


@dataclass
class StubVideoBackend:
    faults: deque = field(default_factory=deque)

    def render(self, spec: VeoSpec) -> bytes:
        if self.faults:
            raise self.faults.popleft()
        payload = {"kind": "stub-video", "spec_digest": digest_json(spec.to_jsonable())}
        return canonical_json(payload).encode("utf-8")


class HttpTtsBackend:
    """POST {base}/synthesize {"script": ...} -> audio bytes."""

    def __init__(self, base_url: str, client=None):
        if client is None:
            import httpx

            client = httpx.Client(timeout=120.0)
        self.base_url = base_url.rstrip("/")
        self._client = client

    def synthesize(self, script: str) -> bytes:
        try:
            response = self._client.post(f"{self.base_url}/synthesize", json={"script": script})
        except Exception as err:
            raise BackendUnavailable(f"TTS backend unreachable: {err}") from err
        if response.status_code >= 500:
            raise BackendUnavailable(f"TTS backend error: HTTP {response.status_code}")
        if response.status_code >= 400:
            raise BackendRejectedSpec(f"TTS backend rejected script: HTTP {response.status_code}")
        return response.content


class HttpVideoBackend:
    """POST {base}/render <veo spec JSON> -> video bytes."""

    def __init__(self, base_url: str, client=None):
        if client is None:
            import httpx

            client = httpx.Client(timeout=600.0)
        self.base_url = base_url.rstrip("/")
        self._client = client

    def render(self, spec: VeoSpec) -> bytes:
        try:
            response = self._client.post(f"{self.base_url}/render", json=spec.to_jsonable())
        except Exception as err:
            raise BackendUnavailable(f"video backend unreachable: {err}") from err
        if response.status_code >= 500:
            raise BackendUnavailable(f"video backend error: HTTP {response.status_code}")
        if response.status_code >= 400:
            raise BackendRejectedSpec(f"video backend rejected spec: HTTP {response.status_code}")
        return response.content


def synthesize_audio(script: str, tts_backend, store: ContentStore) -> ArtifactRef:
    if not script.strip():
        raise ValueError("cannot synthesize audio from an empty script")
    data = tts_backend.synthesize(script)
    return store.add(AUDIO_ARTIFACT, "audio/mpeg", data)


def script_to_video(spec: VeoSpec, video_backend, store: ContentStore) -> ArtifactRef:
    data = video_backend.render(spec)
    return store.add(VIDEO_ARTIFACT, "video/mp4", data)


def backend_faults(kind: str, count: int) -> deque:
    """Scripted fault queues for the stub backends (see docs/formats.md)."""
    factories = {
        "unavailable": lambda: BackendUnavailable("scripted backend outage"),
        "reject": lambda: BackendRejectedSpec("scripted backend rejection"),
    }
    if kind not in factories:
        raise ValueError(f"unknown backend fault kind: {kind!r}")
    faults: deque[PodflowError] = deque()
    for _ in range(count):
        faults.append(factories[kind]())
    return faults
