"""Declarative workflow specs, validation, and deterministic execution."""

from .spec import InputField, StepSpec, WorkflowSpec
from .validate import validate_workflow
from .engine import (
    FunctionRegistry,
    RunLedger,
    StepContext,
    StepRecord,
    WorkflowRuntime,
    execute_workflow,
    resolve_bindings,
)

__all__ = [
    "FunctionRegistry",
    "InputField",
    "RunLedger",
    "StepContext",
    "StepRecord",
    "StepSpec",
    "WorkflowRuntime",
    "WorkflowSpec",
    "execute_workflow",
    "resolve_bindings",
    "validate_workflow",
]
