"""Static validation of workflow specs against registry and catalog.

A spec with findings is never executable; the engine re-checks before
running. Findings cover the structural invariants (unique names,
resolvable sequential bindings, kind/role pairing, fan-out membership),
registered functions, and — delegated to the agent checks — the
one-agent-one-tool rule and prompt resolvability.
"""

from __future__ import annotations

from typing import Optional

from ..agents import AgentCatalog, validate_agent
from ..prompts import PromptStore
from ..retry import MAX_ATTEMPT_CEILING
from ..validation import ValidationReport
from .spec import WorkflowSpec, classify_binding


def validate_workflow(
    spec: WorkflowSpec,
    registry,
    catalog: AgentCatalog,
    prompt_store: Optional[PromptStore] = None,
    max_attempt_ceiling: int = MAX_ATTEMPT_CEILING,
) -> ValidationReport:
    report = ValidationReport()
    if not spec.steps:
        report.add("EmptyWorkflow", spec.id, "workflow has no steps")

    seen: set[str] = set()
    for step in spec.steps:
        if step.name in seen:
            report.add("DuplicateStepName", step.name, "step name reused within the workflow")
        seen.add(step.name)

    checked_agents: set[str] = set()

    def check_agent(name: str, location: str) -> None:
        if name not in catalog:
            report.add("UnknownAgent", location, f"agent {name!r} not in catalog")
            return
        if name in checked_agents:
            return
        checked_agents.add(name)
        report.extend(validate_agent(catalog.raw(name), prompt_store))

    inputs = spec.input_names()
    prior: set[str] = set()
    for step in spec.steps:
        roles = step.populated_roles()
        expected = {"agent": ["agent"], "function": ["function"], "fan_out": ["group"]}[step.kind]
        if roles != expected:
            report.add(
                "StepRoleMismatch",
                step.name,
                f"kind={step.kind} must populate exactly {expected[0]!r}, found {roles or ['nothing']}",
            )
        if step.kind == "agent" and step.agent:
            check_agent(step.agent, step.name)
        if step.kind == "function" and step.function is not None:
            if not registry.has_function(step.function):
                report.add("UnknownFunction", step.name, f"function {step.function!r} is not registered")
        if step.kind == "fan_out" and step.group is not None:
            if not step.group:
                report.add("EmptyFanOutGroup", step.name, "fan_out group has no members")
            for member in step.group:
                check_agent(member, f"{step.name}.{member}")

        for param, expression in step.bindings.items():
            kind = classify_binding(expression)
            location = f"{step.name}.{param}"
            if kind is None:
                report.add("MalformedBinding", location, f"unparseable binding source {expression!r}")
            elif kind[0] == "input" and kind[1] not in inputs:
                report.add("UnresolvableBinding", location, f"workflow has no input {kind[1]!r}")
            elif kind[0] == "step" and kind[1] not in prior:
                report.add(
                    "UnresolvableBinding",
                    location,
                    f"binding references {kind[1]!r}, which is not an earlier step",
                )

        if step.retry.max_attempts > max_attempt_ceiling:
            report.add(
                "RetryCeilingExceeded",
                step.name,
                f"max_attempts {step.retry.max_attempts} above ceiling {max_attempt_ceiling}",
            )
        prior.add(step.name)

    return report
