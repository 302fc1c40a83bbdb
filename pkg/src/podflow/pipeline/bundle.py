"""Final asset bundle: the published artifact set and its manifest.

The bundle gathers the run's publishable assets — the individual
consortium drafts, the consolidated script, the video spec, and both
media files — seven artifacts in all. The scene-script intermediate is
kept as a run artifact and referenced by the bundle structure but is not
part of the published set. The manifest's file list is exactly the pull
request's file set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..consortium import DraftSet
from ..errors import MissingArtifact
from ..store import ArtifactRef, ContentStore

CONSOLIDATED_PATH = "script.md"
VIDEO_SCRIPT_PATH = "video_script.md"
VEO_PATH = "veo.json"


def draft_path(agent_name: str) -> str:
    return f"drafts/{agent_name}.md"


@dataclass(frozen=True)
class PodcastBundle:
    topic: str
    drafts: tuple[ArtifactRef, ...]
    consolidated: ArtifactRef
    video_script: ArtifactRef
    veo: ArtifactRef
    audio: ArtifactRef
    video: ArtifactRef
    pr_url: Optional[str] = None

    def published_refs(self) -> list[ArtifactRef]:
        return [*self.drafts, self.consolidated, self.veo, self.audio, self.video]

    def manifest_files(self) -> list[dict]:
        return [
            {"path": ref.name, "digest": ref.digest, "media_type": ref.media_type}
            for ref in self.published_refs()
        ]

    def to_jsonable(self) -> dict:
        return {
            "topic": self.topic,
            "files": self.manifest_files(),
            "video_script": self.video_script.to_jsonable(),
            "pr_url": self.pr_url,
        }


def _require(store: ContentStore, ref: Optional[ArtifactRef], logical_name: str) -> ArtifactRef:
    if ref is None or not store.exists(ref.digest):
        raise MissingArtifact(logical_name)
    return ref


def _text_ref(store: ContentStore, path: str, digest: str, media_type: str, logical_name: str) -> ArtifactRef:
    if not store.exists(digest):
        raise MissingArtifact(logical_name)
    return ArtifactRef(name=path, media_type=media_type, location=digest, digest=digest)


def assemble_bundle(
    store: ContentStore,
    topic: str,
    drafts: DraftSet,
    consolidated_digest: str,
    video_script_digest: str,
    veo_digest: str,
    audio: Optional[ArtifactRef],
    video: Optional[ArtifactRef],
) -> PodcastBundle:
    """Resolve every upstream artifact into the bundle, or fail by name."""
    draft_refs = tuple(
        _text_ref(store, draft_path(d.agent_name), d.digest, "text/markdown", f"draft:{d.agent_name}")
        for d in drafts.drafts
    )
    return PodcastBundle(
        topic=topic,
        drafts=draft_refs,
        consolidated=_text_ref(store, CONSOLIDATED_PATH, consolidated_digest, "text/markdown", "consolidated"),
        video_script=_text_ref(store, VIDEO_SCRIPT_PATH, video_script_digest, "text/markdown", "video_script"),
        veo=_text_ref(store, VEO_PATH, veo_digest, "application/json", "veo"),
        audio=_require(store, audio, "audio"),
        video=_require(store, video, "video"),
    )
