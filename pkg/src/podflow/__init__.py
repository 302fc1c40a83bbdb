"""podflow — agentic workflow engine with a news-to-podcast pipeline.

Lazy re-exports keep light consumers light: importing ``podflow.mcp``
must not drag in the engine, pipeline, or provider stack.
"""

__version__ = "0.1.0"

_LAZY = {
    "AgentCatalog": ("podflow.agents", "AgentCatalog"),
    "AgentDefinition": ("podflow.agents", "AgentDefinition"),
    "ContentStore": ("podflow.store", "ContentStore"),
    "Gateway": ("podflow.gateway", "Gateway"),
    "ModelBinding": ("podflow.gateway", "ModelBinding"),
    "PromptStore": ("podflow.prompts", "PromptStore"),
    "RunLedger": ("podflow.workflow.engine", "RunLedger"),
    "WorkflowRuntime": ("podflow.workflow.engine", "WorkflowRuntime"),
    "WorkflowSpec": ("podflow.workflow.spec", "WorkflowSpec"),
    "execute_workflow": ("podflow.workflow.engine", "execute_workflow"),
    "validate_workflow": ("podflow.workflow.validate", "validate_workflow"),
}


def __getattr__(name):
    if name in _LAZY:
        import importlib

        module_name, attr = _LAZY[name]
        return getattr(importlib.import_module(module_name), attr)
    raise AttributeError(f"module 'podflow' has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_LAZY))
