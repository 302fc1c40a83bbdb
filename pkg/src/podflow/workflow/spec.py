"""Workflow specification model and its JSON document form.

Data flow is strictly sequential with optional fan-out groups — not a
general DAG. A step binds its parameters to workflow inputs
(``input:<name>``) or to the output of an earlier step
(``step:<name>.output``), which makes cycles unrepresentable. The JSON
layout is documented in docs/formats.md and mirrored by
docs/workflow-spec.schema.json.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import InvalidWorkflow
from ..retry import RetryPolicy

STEP_KINDS = ("agent", "function", "fan_out")
INPUT_TYPES = ("text", "text-list")

INPUT_BINDING_RE = re.compile(r"^input:(?P<name>[A-Za-z_][A-Za-z0-9_]*)$")
STEP_BINDING_RE = re.compile(r"^step:(?P<name>[A-Za-z_][A-Za-z0-9_]*)\.output$")


@dataclass(frozen=True)
class InputField:
    name: str
    type: str = "text"

    def to_jsonable(self) -> dict:
        return {"name": self.name, "type": self.type}


@dataclass(frozen=True)
class StepSpec:
    name: str
    kind: str
    agent: Optional[str] = None
    function: Optional[str] = None
    group: Optional[tuple[str, ...]] = None
    bindings: dict = field(default_factory=dict)
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def populated_roles(self) -> list[str]:
        roles = []
        if self.agent is not None:
            roles.append("agent")
        if self.function is not None:
            roles.append("function")
        if self.group is not None:
            roles.append("group")
        return roles

    def to_jsonable(self) -> dict:
        doc: dict = {"name": self.name, "kind": self.kind, "bindings": dict(self.bindings)}
        if self.agent is not None:
            doc["agent"] = self.agent
        if self.function is not None:
            doc["function"] = self.function
        if self.group is not None:
            doc["group"] = list(self.group)
        doc["retry"] = self.retry.to_jsonable()
        return doc


@dataclass(frozen=True)
class WorkflowSpec:
    id: str
    version: str
    steps: tuple[StepSpec, ...]
    input_schema: tuple[InputField, ...] = ()

    def step_names(self) -> list[str]:
        return [s.name for s in self.steps]

    def input_names(self) -> set[str]:
        return {f.name for f in self.input_schema}

    def to_jsonable(self) -> dict:
        return {
            "id": self.id,
            "version": self.version,
            "input_schema": [f.to_jsonable() for f in self.input_schema],
            "steps": [s.to_jsonable() for s in self.steps],
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "WorkflowSpec":
        if not isinstance(doc, dict):
            raise InvalidWorkflow("workflow document must be a JSON object")
        try:
            steps = tuple(_step_from_jsonable(s) for s in doc.get("steps", []))
            inputs = tuple(
                InputField(name=f["name"], type=f.get("type", "text"))
                for f in doc.get("input_schema", [])
            )
            spec = cls(
                id=doc["id"],
                version=doc.get("version", "0.0.0"),
                steps=steps,
                input_schema=inputs,
            )
        except (KeyError, TypeError, ValueError) as err:
            raise InvalidWorkflow(f"malformed workflow document: {err}") from err
        for field_ in spec.input_schema:
            if field_.type not in INPUT_TYPES:
                raise InvalidWorkflow(f"input {field_.name!r} has unknown type {field_.type!r}")
        return spec

    @classmethod
    def load(cls, path: str | Path) -> "WorkflowSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except ValueError as err:
            raise InvalidWorkflow(f"workflow file is not valid JSON: {path}: {err}") from err
        return cls.from_jsonable(doc)


def _step_from_jsonable(doc: dict) -> StepSpec:
    kind = doc.get("kind")
    if kind not in STEP_KINDS:
        raise ValueError(f"step {doc.get('name')!r} has unknown kind {kind!r}")
    return StepSpec(
        name=doc["name"],
        kind=kind,
        agent=doc.get("agent"),
        function=doc.get("function"),
        group=tuple(doc["group"]) if doc.get("group") is not None else None,
        bindings=dict(doc.get("bindings", {})),
        retry=RetryPolicy.from_jsonable(doc.get("retry", {})),
    )


def classify_binding(expression: str):
    """Split a binding source into ("input"|"step", name), or None."""
    match = INPUT_BINDING_RE.match(expression)
    if match:
        return ("input", match.group("name"))
    match = STEP_BINDING_RE.match(expression)
    if match:
        return ("step", match.group("name"))
    return None
