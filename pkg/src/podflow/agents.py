"""Agent definitions and the prompt -> model -> (optional tool) loop.

Two structural rules are enforced here rather than left to convention:
an agent has at most one tool (catalog entries with more are rejected
before anything executes), and a strict-JSON agent's output must parse
and validate against its declared schema or the run surfaces an
``OutputContractViolation`` — never a silent acceptance.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import jsonschema

from .canonical import digest_text
from .errors import (
    MalformedToolCall,
    OutputContractViolation,
    PromptNotFound,
    ToolRoundsExceeded,
)
from .gateway import ChatMessage, Gateway, ModelBinding, ToolCall
from .prompts import PromptStore, render_prompt
from .validation import ValidationReport

log = logging.getLogger(__name__)

PARAMETER_TYPES = ("text", "text-list", "integer", "boolean")
DEFAULT_MAX_TOOL_ROUNDS = 3

OUTPUT_CONTRACTS = ("free_text", "strict_json")


@dataclass(frozen=True)
class ToolParameter:
    name: str
    type: str
    required: bool = True

    def __post_init__(self):
        if self.type not in PARAMETER_TYPES:
            raise ValueError(f"unknown parameter type: {self.type}")


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: tuple[ToolParameter, ...]

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError("tool parameter names must be unique")

    @classmethod
    def from_jsonable(cls, doc: dict) -> "ToolSchema":
        return cls(
            name=doc["name"],
            description=doc.get("description", ""),
            parameters=tuple(
                ToolParameter(p["name"], p["type"], bool(p.get("required", True)))
                for p in doc.get("parameters", [])
            ),
        )


@dataclass(frozen=True)
class ToolCallRequest:
    tool_name: str
    arguments: Mapping[str, object]


@dataclass
class AgentResult:
    text: str
    tool_trace: list[tuple[ToolCallRequest, str]] = field(default_factory=list)
    token_usage: dict = field(default_factory=lambda: {"prompt_tokens": 0, "completion_tokens": 0})
    rendered_prompt: str = ""


@dataclass(frozen=True)
class AgentDefinition:
    """One prompt, one model binding, at most one tool.

    Constructing a definition with two tools is impossible by shape; the
    list-permitting catalog format is policed by ``validate_agent``.
    """

    name: str
    prompt_key: str
    binding: ModelBinding
    tool: Optional[ToolSchema] = None
    output_contract: str = "free_text"
    output_schema: Optional[dict] = None
    output_validator: Optional[str] = None
    max_tool_rounds: int = DEFAULT_MAX_TOOL_ROUNDS
    prompt_pin: Optional[str] = None

    def __post_init__(self):
        if self.output_contract not in OUTPUT_CONTRACTS:
            raise ValueError(f"unknown output contract: {self.output_contract}")
        if self.output_contract == "strict_json" and self.output_schema is None:
            raise ValueError("strict_json contract requires an output schema")
        if self.max_tool_rounds < 0:
            raise ValueError("max_tool_rounds must be >= 0")


def _type_ok(expected: str, value: object) -> bool:
    if expected == "text":
        return isinstance(value, str)
    if expected == "text-list":
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    if expected == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if expected == "boolean":
        return isinstance(value, bool)
    return False


def parse_tool_call(raw: ToolCall, schema: ToolSchema) -> ToolCallRequest:
    """Admit a model-issued call iff it matches the schema exactly."""
    if raw.name != schema.name:
        raise MalformedToolCall("wrong_name", f"model called {raw.name!r}, agent's tool is {schema.name!r}")
    known = {p.name: p for p in schema.parameters}
    for arg in raw.arguments:
        if arg not in known:
            raise MalformedToolCall("unknown_argument", f"unexpected argument {arg!r}")
    for param in schema.parameters:
        if param.name not in raw.arguments:
            if param.required:
                raise MalformedToolCall("missing_required", f"missing required argument {param.name!r}")
            continue
        if not _type_ok(param.type, raw.arguments[param.name]):
            raise MalformedToolCall(
                "type_mismatch", f"argument {param.name!r} is not of type {param.type}"
            )
    return ToolCallRequest(tool_name=raw.name, arguments=dict(raw.arguments))


def validate_agent(entry, prompt_store: Optional[PromptStore] = None) -> ValidationReport:
    """Check one catalog entry (raw dict) or built definition.

    Serialized catalogs may carry a ``tools`` list; anything beyond one
    tool is a SingleToolViolation finding and the entry is never
    constructed into a runnable definition.
    """
    report = ValidationReport()
    if isinstance(entry, AgentDefinition):
        name = entry.name
        prompt_key = entry.prompt_key
        tool_count = 1 if entry.tool else 0
        contract = entry.output_contract
        has_schema = entry.output_schema is not None
    else:
        name = entry.get("name", "<unnamed>")
        if not entry.get("name"):
            report.add("MissingName", "<unnamed>", "agent entry has no name")
        prompt_key = entry.get("prompt")
        tools = entry.get("tools")
        if tools is None:
            tools = [entry["tool"]] if entry.get("tool") else []
        tool_count = len(tools)
        contract = entry.get("output_contract", "free_text")
        has_schema = bool(entry.get("output_schema"))
        if not entry.get("binding"):
            report.add("MissingBinding", name, "agent entry has no model binding")
    if tool_count > 1:
        report.add("SingleToolViolation", name, f"agent declares {tool_count} tools; the limit is one")
    if contract == "strict_json" and not has_schema:
        report.add("MissingSchema", name, "strict_json contract without an output schema")
    if not prompt_key:
        report.add("MissingPrompt", name, "agent entry has no prompt reference")
    elif prompt_store is not None:
        try:
            prompt_store.load(prompt_key)
        except PromptNotFound as err:
            report.add("MissingPrompt", name, str(err))
    return report


class AgentCatalog:
    """Agent definitions parsed from a JSON catalog document.

    Raw entries are kept so validation can report on shapes (like tool
    lists) that the typed ``AgentDefinition`` cannot even represent.
    """

    def __init__(self, entries: Sequence[dict], base_dir: Optional[Path] = None):
        self._entries = {e.get("name", f"<entry {i}>"): dict(e) for i, e in enumerate(entries)}
        self._base_dir = base_dir
        self._built: dict[str, AgentDefinition] = {}

    @classmethod
    def load(cls, path: str | Path) -> "AgentCatalog":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        return cls(doc.get("agents", []), base_dir=path.parent)

    @classmethod
    def from_jsonable(cls, doc: dict, base_dir: Optional[Path] = None) -> "AgentCatalog":
        return cls(doc.get("agents", []), base_dir=base_dir)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def raw(self, name: str) -> dict:
        return self._entries[name]

    def validate(self, prompt_store: Optional[PromptStore] = None) -> ValidationReport:
        report = ValidationReport()
        for name in self.names():
            report.extend(validate_agent(self._entries[name], prompt_store))
        return report

    def _resolve_schema(self, ref) -> dict:
        if isinstance(ref, dict):
            return ref
        if self._base_dir is None:
            raise ValueError(f"schema reference {ref!r} needs a catalog base directory")
        return json.loads((self._base_dir / ref).read_text(encoding="utf-8"))

    def get(self, name: str) -> AgentDefinition:
        if name in self._built:
            return self._built[name]
        if name not in self._entries:
            raise KeyError(f"unknown agent: {name}")
        entry = self._entries[name]
        tools = entry.get("tools")
        if tools is None:
            tools = [entry["tool"]] if entry.get("tool") else []
        if len(tools) > 1:
            raise ValueError(f"agent {name!r} declares {len(tools)} tools; the limit is one")
        schema_ref = entry.get("output_schema")
        definition = AgentDefinition(
            name=entry["name"],
            prompt_key=entry["prompt"],
            binding=ModelBinding.from_jsonable(entry["binding"]),
            tool=ToolSchema.from_jsonable(tools[0]) if tools else None,
            output_contract=entry.get("output_contract", "free_text"),
            output_schema=self._resolve_schema(schema_ref) if schema_ref else None,
            output_validator=entry.get("output_validator"),
            max_tool_rounds=int(entry.get("max_tool_rounds", DEFAULT_MAX_TOOL_ROUNDS)),
            prompt_pin=entry.get("prompt_pin"),
        )
        self._built[name] = definition
        return definition


def check_output_contract(agent: AgentDefinition, text: str, validators: Optional[Mapping[str, Callable]] = None) -> None:
    """Raise OutputContractViolation unless ``text`` satisfies the contract."""
    if agent.output_contract != "strict_json":
        return
    try:
        doc = json.loads(text)
    except ValueError as err:
        raise OutputContractViolation(f"agent {agent.name}: output is not a JSON document: {err}") from err
    try:
        jsonschema.validate(doc, agent.output_schema)
    except jsonschema.ValidationError as err:
        raise OutputContractViolation(f"agent {agent.name}: JSON violates schema: {err.message}") from err
    if agent.output_validator:
        validator = (validators or {}).get(agent.output_validator)
        if validator is None:
            raise ValueError(f"agent {agent.name}: validator {agent.output_validator!r} not registered")
        validator(doc)


def run_agent(
    agent: AgentDefinition,
    variables: Mapping[str, object],
    prompt_store: PromptStore,
    gateway: Gateway,
    tool_executor: Optional[Callable[[ToolCallRequest], str]] = None,
    validators: Optional[Mapping[str, Callable]] = None,
) -> AgentResult:
    """Render the prompt, chat until the model settles on plain content.

    Every model-issued tool call passes ``parse_tool_call`` before the
    executor runs; its output is appended as a tool message and the loop
    continues, bounded by ``max_tool_rounds``.
    """
    template = prompt_store.load(agent.prompt_key, version=agent.prompt_pin)
    prompt = render_prompt(template, variables)
    messages = [ChatMessage("user", prompt)]
    trace: list[tuple[ToolCallRequest, str]] = []
    prompt_tokens = completion_tokens = 0

    while True:
        response = gateway.chat(agent.binding, messages, tool=agent.tool)
        prompt_tokens += response.usage.prompt_tokens
        completion_tokens += response.usage.completion_tokens
        if response.tool_call is None:
            text = response.content or ""
            check_output_contract(agent, text, validators)
            return AgentResult(
                text=text,
                tool_trace=trace,
                token_usage={"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
                rendered_prompt=prompt,
            )
        if agent.tool is None:
            raise MalformedToolCall(
                "wrong_name", f"agent {agent.name} has no tool but model called {response.tool_call.name!r}"
            )
        if len(trace) >= agent.max_tool_rounds:
            raise ToolRoundsExceeded(f"agent {agent.name} exceeded {agent.max_tool_rounds} tool rounds")
        request = parse_tool_call(response.tool_call, agent.tool)
        if tool_executor is None:
            raise ValueError(f"agent {agent.name} has tool {agent.tool.name!r} but no executor was provided")
        output = tool_executor(request)
        output_text = output if isinstance(output, str) else output.decode("utf-8")
        trace.append((request, digest_text(output_text)))
        call_id = response.tool_call.call_id or f"call_{len(trace)}"
        messages.append(ChatMessage("assistant", tool_call=ToolCall(request.tool_name, dict(request.arguments), call_id)))
        messages.append(ChatMessage("tool", content=output_text, tool_result_for=call_id))
