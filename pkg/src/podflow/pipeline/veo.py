"""Scene-based structured video specification and its builder agents.

The video path is split in two: an agent turns the consolidated script
into scene-structured narrative text, a second agent emits strictly
valid JSON against the spec schema, and actual rendering is a pure
function elsewhere. Duration arithmetic (consecutive scene ids, scene
durations summing to the total, a hard ceiling) lives here because JSON
schema cannot express it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib.resources import files

from ..agents import AgentDefinition, run_agent
from ..errors import OutputContractViolation
from ..gateway import Gateway
from ..prompts import PromptStore

DURATION_CEILING_S = 480
ASPECT_RATIOS = ("16:9", "9:16")

_schema_cache: dict | None = None


def veo_schema() -> dict:
    """Structural JSON schema, shipped as package data next to the prompts."""
    global _schema_cache
    if _schema_cache is None:
        raw = files("podflow").joinpath("data/agents/schemas/veo_spec.json").read_text(encoding="utf-8")
        _schema_cache = json.loads(raw)
    return _schema_cache


@dataclass(frozen=True)
class VeoScene:
    id: int
    duration_s: int
    visual_description: str
    narration: str
    style: str

    def to_jsonable(self) -> dict:
        return {
            "id": self.id,
            "duration_s": self.duration_s,
            "visual_description": self.visual_description,
            "narration": self.narration,
            "style": self.style,
        }


@dataclass(frozen=True)
class VeoSpec:
    title: str
    total_duration_s: int
    scenes: tuple[VeoScene, ...]
    aspect_ratio: str

    def to_jsonable(self) -> dict:
        return {
            "title": self.title,
            "total_duration_s": self.total_duration_s,
            "aspect_ratio": self.aspect_ratio,
            "scenes": [scene.to_jsonable() for scene in self.scenes],
        }


def validate_veo_doc(doc: dict, ceiling_s: int = DURATION_CEILING_S) -> None:
    """Arithmetic invariants beyond the structural schema.

    Raises OutputContractViolation so the agent retry path treats a bad
    generation like any other contract breach.
    """
    scenes = doc.get("scenes", [])
    ids = [scene.get("id") for scene in scenes]
    if ids != list(range(1, len(scenes) + 1)):
        raise OutputContractViolation(f"scene ids must be 1..{len(scenes)} consecutive, got {ids}")
    total = doc.get("total_duration_s", 0)
    scene_sum = sum(int(scene.get("duration_s", 0)) for scene in scenes)
    if scene_sum != total:
        raise OutputContractViolation(f"scene durations sum to {scene_sum}, total_duration_s says {total}")
    if total > ceiling_s:
        raise OutputContractViolation(f"total_duration_s {total} exceeds ceiling {ceiling_s}")


def veo_output_validator(doc: dict) -> None:
    validate_veo_doc(doc)


def veo_spec_from_doc(doc: dict) -> VeoSpec:
    return VeoSpec(
        title=doc["title"],
        total_duration_s=int(doc["total_duration_s"]),
        aspect_ratio=doc["aspect_ratio"],
        scenes=tuple(
            VeoScene(
                id=int(scene["id"]),
                duration_s=int(scene["duration_s"]),
                visual_description=scene["visual_description"],
                narration=scene["narration"],
                style=scene.get("style", ""),
            )
            for scene in doc["scenes"]
        ),
    )


def parse_veo_text(text: str) -> VeoSpec:
    """Parse and fully validate an agent's JSON output into a VeoSpec."""
    import jsonschema

    try:
        doc = json.loads(text)
    except ValueError as err:
        raise OutputContractViolation(f"video spec is not a JSON document: {err}") from err
    try:
        jsonschema.validate(doc, veo_schema())
    except jsonschema.ValidationError as err:
        raise OutputContractViolation(f"video spec violates schema: {err.message}") from err
    validate_veo_doc(doc)
    return veo_spec_from_doc(doc)


def build_video_script(consolidated_text: str, video_agent: AgentDefinition, prompt_store: PromptStore, gateway: Gateway) -> str:
    if not consolidated_text.strip():
        raise ValueError("cannot build a video script from an empty consolidated script")
    result = run_agent(video_agent, {"script": consolidated_text}, prompt_store, gateway)
    return result.text


def build_veo_json(video_script: str, veo_agent: AgentDefinition, prompt_store: PromptStore, gateway: Gateway) -> VeoSpec:
    result = run_agent(
        veo_agent,
        {"script": video_script},
        prompt_store,
        gateway,
        validators={"veo_spec": veo_output_validator},
    )
    return parse_veo_text(result.text)
