"""Deterministic workflow execution with a complete run ledger.

Steps run strictly in spec order; fan-out groups dispatch their members
concurrently but record results in lexical agent order. Every step
output is persisted to the content store and referenced by digest, so
two runs over identical inputs and a deterministic gateway produce
ledgers that are byte-identical once run id, timestamps, and durations
are erased.
"""

from __future__ import annotations

import logging
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Mapping, Optional

from .. import consortium
from ..agents import AgentCatalog, run_agent
from ..canonical import canonical_json, digest_json, to_jsonable
from ..errors import (
    InputSchemaMismatch,
    InvalidWorkflow,
    PodflowError,
    RateLimited,
    UnresolvedBinding,
)
from ..gateway import Gateway
from ..prompts import PromptStore
from ..store import ArtifactRef, ContentStore
from .spec import StepSpec, WorkflowSpec, classify_binding
from .validate import validate_workflow

log = logging.getLogger(__name__)


class FunctionRegistry:
    """Named pure functions and tool executors available to workflows."""

    def __init__(self):
        self._functions: dict[str, Callable] = {}
        self._tools: dict[str, Callable] = {}

    def register(self, name: str, fn: Callable) -> None:
        self._functions[name] = fn

    def register_tool(self, name: str, fn: Callable) -> None:
        self._tools[name] = fn

    def has_function(self, name: str) -> bool:
        return name in self._functions

    def function(self, name: str) -> Callable:
        return self._functions[name]

    def has_tool(self, name: str) -> bool:
        return name in self._tools

    def tool(self, name: str) -> Callable:
        return self._tools[name]

    def function_names(self) -> list[str]:
        return sorted(self._functions)


@dataclass
class StepRecord:
    step: str
    attempt: int
    input_digest: str
    output_digest: Optional[str]
    outcome: str  # ok | retryable_error | fatal_error
    error_detail: Optional[str] = None
    duration_s: float = 0.0
    token_usage: Optional[dict] = None

    def to_jsonable(self) -> dict:
        return {
            "step": self.step,
            "attempt": self.attempt,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
            "outcome": self.outcome,
            "error_detail": self.error_detail,
            "duration_s": self.duration_s,
            "token_usage": self.token_usage,
        }


@dataclass
class RunLedger:
    run_id: str
    workflow_id: str
    workflow_version: str
    status: str  # running | succeeded | failed
    inputs: dict
    records: list[StepRecord] = field(default_factory=list)
    artifacts: dict[str, ArtifactRef] = field(default_factory=dict)
    started_at: str = ""
    ended_at: str = ""

    def to_jsonable(self) -> dict:
        return {
            "run_id": self.run_id,
            "workflow_id": self.workflow_id,
            "workflow_version": self.workflow_version,
            "status": self.status,
            "inputs": self.inputs,
            "records": [r.to_jsonable() for r in self.records],
            "artifacts": {name: ref.to_jsonable() for name, ref in self.artifacts.items()},
            "started_at": self.started_at,
            "ended_at": self.ended_at,
        }

    def canonical(self, erase_volatile: bool = False) -> str:
        doc = self.to_jsonable()
        if erase_volatile:
            doc = erase_volatile_fields(doc)
        return canonical_json(doc)

    def last_error(self) -> Optional[str]:
        for record in reversed(self.records):
            if record.error_detail:
                return record.error_detail
        return None


def erase_volatile_fields(ledger_doc: dict) -> dict:
    """Null the per-run noise (run id, wall-clock, durations) for comparison."""
    doc = dict(ledger_doc)
    doc["run_id"] = None
    doc["started_at"] = None
    doc["ended_at"] = None
    doc["records"] = [{**r, "duration_s": None} for r in doc.get("records", [])]
    return doc


@dataclass
class StepContext:
    """What a pure-function step gets to touch at execution time."""

    run_id: str
    store: ContentStore
    services: Any
    _artifact_sink: Callable[[ArtifactRef], None] = lambda ref: None

    def add_artifact(self, ref: ArtifactRef) -> None:
        self._artifact_sink(ref)


@dataclass
class WorkflowRuntime:
    """Everything execution needs beyond the spec and inputs."""

    registry: FunctionRegistry
    catalog: AgentCatalog
    gateway: Gateway
    prompt_store: PromptStore
    store: ContentStore
    services: Any = None
    validators: Mapping[str, Callable] = field(default_factory=dict)
    consortium_quorum: Optional[int] = None


def resolve_bindings(step: StepSpec, inputs: Mapping[str, Any], outputs: Mapping[str, Any]) -> dict:
    """Pure mapping of binding expressions to their current values."""
    resolved = {}
    for param, expression in step.bindings.items():
        kind = classify_binding(expression)
        if kind is None:
            raise UnresolvedBinding(expression)
        source, name = kind
        pool = inputs if source == "input" else outputs
        if name not in pool:
            raise UnresolvedBinding(expression)
        resolved[param] = pool[name]
    return resolved


def check_inputs(spec: WorkflowSpec, inputs: Mapping[str, Any]) -> None:
    declared = {f.name: f.type for f in spec.input_schema}
    missing = set(declared) - set(inputs)
    if missing:
        raise InputSchemaMismatch(f"missing inputs: {sorted(missing)}")
    extra = set(inputs) - set(declared)
    if extra:
        raise InputSchemaMismatch(f"unexpected inputs: {sorted(extra)}")
    for name, expected in declared.items():
        value = inputs[name]
        if expected == "text" and not isinstance(value, str):
            raise InputSchemaMismatch(f"input {name!r} must be text")
        if expected == "text-list" and not (isinstance(value, list) and all(isinstance(v, str) for v in value)):
            raise InputSchemaMismatch(f"input {name!r} must be a list of text values")


def to_prompt_variables(resolved: Mapping[str, Any]) -> dict[str, str]:
    """Coerce bound values into the text form prompt templates take.

    Strings pass through; structured values that know how to present
    themselves (draft sets, scraped corpora) use ``as_prompt_text``;
    everything else is embedded as canonical JSON.
    """
    variables = {}
    for name, value in resolved.items():
        if isinstance(value, str):
            variables[name] = value
        elif hasattr(value, "as_prompt_text"):
            variables[name] = value.as_prompt_text()
        else:
            variables[name] = canonical_json(to_jsonable(value))
    return variables


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


class _StepFailure(Exception):
    """Internal signal that a step is out of attempts."""


def execute_workflow(
    spec: WorkflowSpec,
    inputs: Mapping[str, Any],
    runtime: WorkflowRuntime,
    run_id: Optional[str] = None,
    observer: Optional[Callable[[RunLedger], None]] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> RunLedger:
    """Run a validated spec to completion, returning the full ledger.

    The ledger is returned for failed runs too, truncated at the failed
    step, with the error detail on that step's final record.
    """
    report = validate_workflow(spec, runtime.registry, runtime.catalog)
    if not report.ok:
        raise InvalidWorkflow("; ".join(report.lines()))
    check_inputs(spec, inputs)

    ledger = RunLedger(
        run_id=run_id or uuid.uuid4().hex,
        workflow_id=spec.id,
        workflow_version=spec.version,
        status="running",
        inputs=dict(inputs),
        started_at=_now_iso(),
    )

    def notify():
        if observer is not None:
            observer(ledger)

    notify()
    outputs: dict[str, Any] = {}
    try:
        for step in spec.steps:
            outputs[step.name] = _run_step_with_retries(step, ledger, inputs, outputs, runtime, notify, sleep)
    except _StepFailure:
        ledger.status = "failed"
        ledger.ended_at = _now_iso()
        notify()
        return ledger
    ledger.status = "succeeded"
    ledger.ended_at = _now_iso()
    notify()
    return ledger


def _run_step_with_retries(step, ledger, inputs, outputs, runtime, notify, sleep):
    try:
        resolved = resolve_bindings(step, inputs, outputs)
    except UnresolvedBinding as err:
        # Unreachable after validation; record a zero-attempt fatal anyway.
        ledger.records.append(
            StepRecord(step.name, 1, digest_json({}), None, "fatal_error", f"{type(err).__name__}: {err}")
        )
        notify()
        raise _StepFailure() from err
    input_digest = digest_json(to_jsonable(resolved))

    attempt = 0
    while True:
        attempt += 1
        started = time.monotonic()
        try:
            value, extras, usage = _run_step(step, resolved, ledger, runtime)
        except Exception as err:  # noqa: BLE001 - classified below
            retryable = isinstance(err, PodflowError) and err.retryable
            record = StepRecord(
                step=step.name,
                attempt=attempt,
                input_digest=input_digest,
                output_digest=None,
                outcome="retryable_error" if retryable else "fatal_error",
                error_detail=f"{type(err).__name__}: {err}",
                duration_s=time.monotonic() - started,
            )
            ledger.records.append(record)
            notify()
            if retryable and attempt < step.retry.max_attempts:
                pause = step.retry.backoff_for(attempt)
                if isinstance(err, RateLimited):
                    pause = max(pause, err.retry_after_s)
                if pause > 0:
                    sleep(pause)
                continue
            log.warning("run %s: step %s failed on attempt %d: %s", ledger.run_id, step.name, attempt, err)
            raise _StepFailure() from err

        output_digest = _persist_output(step, value, ledger, runtime)
        for ref in extras:
            ledger.artifacts[ref.name] = ref
        ledger.records.append(
            StepRecord(
                step=step.name,
                attempt=attempt,
                input_digest=input_digest,
                output_digest=output_digest,
                outcome="ok",
                duration_s=time.monotonic() - started,
                token_usage=usage,
            )
        )
        notify()
        return value


def _run_step(step: StepSpec, resolved: dict, ledger: RunLedger, runtime: WorkflowRuntime):
    """Returns (output value, extra artifacts, token usage or None)."""
    extras: list[ArtifactRef] = []
    if step.kind == "function":
        ctx = StepContext(
            run_id=ledger.run_id,
            store=runtime.store,
            services=runtime.services,
            _artifact_sink=extras.append,
        )
        return runtime.registry.function(step.function)(ctx, **resolved), extras, None

    if step.kind == "agent":
        agent = runtime.catalog.get(step.agent)
        executor = None
        if agent.tool is not None:
            ctx = StepContext(run_id=ledger.run_id, store=runtime.store, services=runtime.services)
            tool_fn = runtime.registry.tool(agent.tool.name)
            executor = lambda request: tool_fn(ctx, request)  # noqa: E731
        result = run_agent(
            agent,
            to_prompt_variables(resolved),
            runtime.prompt_store,
            runtime.gateway,
            tool_executor=executor,
            validators=runtime.validators,
        )
        extras.append(
            runtime.store.add(f"{step.name}.prompt", "text/plain", result.rendered_prompt.encode("utf-8"))
        )
        return result.text, extras, result.token_usage

    if step.kind == "fan_out":
        members = [runtime.catalog.get(name) for name in step.group]
        draft_set = consortium.fan_out(
            members,
            to_prompt_variables(resolved),
            runtime.prompt_store,
            runtime.gateway,
            retry=step.retry,
            quorum=runtime.consortium_quorum,
        )
        for draft in draft_set.drafts:
            extras.append(
                runtime.store.add(f"{step.name}.{draft.agent_name}", "text/markdown", draft.text.encode("utf-8"))
            )
        return draft_set, extras, None

    raise InvalidWorkflow(f"unknown step kind: {step.kind}")


def _persist_output(step: StepSpec, value: Any, ledger: RunLedger, runtime: WorkflowRuntime) -> str:
    """Write the step output to the content store and index it by name."""
    if isinstance(value, ArtifactRef):
        ledger.artifacts[value.name] = value
        return value.digest
    if isinstance(value, str):
        media_type = "text/markdown" if step.kind in ("agent", "fan_out") else "text/plain"
        if step.kind == "agent" and _agent_is_strict_json(step, runtime):
            media_type = "application/json"
        ref = runtime.store.add(step.name, media_type, value.encode("utf-8"))
    else:
        ref = runtime.store.add(step.name, "application/json", canonical_json(to_jsonable(value)).encode("utf-8"))
    ledger.artifacts[ref.name] = ref
    return ref.digest


def _agent_is_strict_json(step: StepSpec, runtime: WorkflowRuntime) -> bool:
    return runtime.catalog.get(step.agent).output_contract == "strict_json"
