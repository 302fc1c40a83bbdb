"""Operator command line: run, validate, prompts, trace, serve.

Exit codes are a stable contract for CI: 0 success, 1 execution or
validation failure, 2 usage error. Result lines go to stdout and stay
line-oriented for golden-file testing; diagnostics go to stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .agents import AgentCatalog
from .errors import PodflowError
from .prompts import PromptStore
from .runtime import Settings, build_stack, default_prompt_source
from .workflow.engine import execute_workflow
from .workflow.spec import WorkflowSpec
from .workflow.validate import validate_workflow


def _echo_err(message: str) -> None:
    click.echo(message, err=True)


def _settings_from(ctx_params: dict, config: str | None) -> Settings:
    return Settings.from_sources(ctx_params, config_file=Path(config) if config else None)


@click.group()
def main() -> None:
    """Agentic workflow engine and news-to-podcast reference pipeline."""


@main.command()
@click.option("--workflow", type=click.Path(exists=True), help="Workflow spec JSON (default: shipped podcast spec).")
@click.option("--agents", type=click.Path(exists=True), help="Agent catalog JSON (default: shipped catalog).")
@click.option("--input", "inputs", multiple=True, help="Workflow input as name=value; text-list values are comma-separated.")
@click.option("--stub-script", type=click.Path(exists=True), help="Stub harness file; makes the run fully offline.")
@click.option("--prompts", help="Prompt source (directory, file, or URL).")
@click.option("--store-dir", help="Content store directory.")
@click.option("--state-dir", help="Run ledger directory.")
@click.option("--config", type=click.Path(exists=True), help="JSON config file (flags > env > file).")
def run(workflow, agents, inputs, stub_script, prompts, store_dir, state_dir, config):
    """Execute a workflow and print the run summary and artifact paths."""
    settings = _settings_from(
        {
            "workflow": workflow,
            "agents": agents,
            "stub_script": stub_script,
            "prompts": prompts,
            "store_dir": store_dir,
            "state_dir": state_dir,
        },
        config,
    )
    try:
        stack = build_stack(settings)
    except PodflowError as err:
        _echo_err(f"error: {err}")
        raise SystemExit(1)

    input_values = _parse_inputs(stack.spec, inputs)

    try:
        ledger = execute_workflow(stack.spec, input_values, stack.runtime)
    except PodflowError as err:
        _echo_err(f"error: {err}")
        raise SystemExit(1)

    state_dir_path = Path(settings.state_dir)
    state_dir_path.mkdir(parents=True, exist_ok=True)
    (state_dir_path / f"{ledger.run_id}.json").write_text(ledger.canonical(), encoding="utf-8")

    click.echo(f"run {ledger.run_id} workflow={ledger.workflow_id} status={ledger.status} records={len(ledger.records)}")
    for name in sorted(ledger.artifacts):
        ref = ledger.artifacts[name]
        click.echo(f"artifact {name} {ref.digest} {stack.runtime.store.path_for(ref.location)}")
    pr_ref = ledger.artifacts.get("publish_pr")
    if pr_ref is not None:
        pr_doc = json.loads(stack.runtime.store.get(pr_ref.location))
        if pr_doc.get("pr_url"):
            click.echo(f"pr {pr_doc['pr_url']}")
    if ledger.status != "succeeded":
        failed = next((r for r in reversed(ledger.records) if r.outcome != "ok"), None)
        if failed is not None:
            _echo_err(f"failed step: {failed.step}: {failed.error_detail}")
        raise SystemExit(1)


def _parse_inputs(spec: WorkflowSpec, pairs) -> dict:
    raw = {}
    for pair in pairs:
        name, separator, value = pair.partition("=")
        if not separator:
            raise click.UsageError(f"--input must be name=value, got {pair!r}")
        raw[name] = value
    values = {}
    for field in spec.input_schema:
        if field.name not in raw:
            raise click.UsageError(f"missing required input {field.name!r}")
        text = raw.pop(field.name)
        if field.type == "text-list":
            values[field.name] = [part.strip() for part in text.split(",") if part.strip()]
        else:
            values[field.name] = text
    if raw:
        raise click.UsageError(f"unknown inputs: {sorted(raw)}")
    return values


@main.command()
@click.option("--workflow", type=click.Path(exists=True), required=True)
@click.option("--agents", "agents_path", type=click.Path(exists=True), required=True)
@click.option("--prompts", help="Prompt source used to resolve prompt references.")
def validate(workflow, agents_path, prompts):
    """Validate a workflow spec and agent catalog; findings print one per line."""
    from .pipeline.steps import build_registry

    spec = WorkflowSpec.load(workflow)
    catalog = AgentCatalog.load(agents_path)
    prompt_store = PromptStore(prompts or default_prompt_source())
    report = validate_workflow(spec, build_registry(), catalog, prompt_store=prompt_store)
    for line in report.lines():
        click.echo(line)
    raise SystemExit(0 if report.ok else 1)


@main.group()
def prompts() -> None:
    """Inspect and hot-reload the prompt source."""


def _prompt_store(source: str | None) -> PromptStore:
    return PromptStore(source or default_prompt_source())


@prompts.command("list")
@click.option("--source", help="Prompt source (default: shipped prompts).")
def prompts_list(source):
    store = _prompt_store(source)
    for key in store.list_keys():
        template = store.load(key)
        click.echo(f"{key} {template.content_digest}")


@prompts.command("show")
@click.argument("key")
@click.option("--source", help="Prompt source (default: shipped prompts).")
def prompts_show(key, source):
    store = _prompt_store(source)
    try:
        template = store.load(key)
    except PodflowError as err:
        _echo_err(f"error: {err}")
        raise SystemExit(1)
    click.echo(template.body, nl=False)
    if not template.body.endswith("\n"):
        click.echo()
    click.echo(f"digest: {template.content_digest}")


@prompts.command("reload")
@click.option("--source", help="Prompt source (default: shipped prompts).")
def prompts_reload(source):
    store = _prompt_store(source)
    store.list_keys()
    try:
        delta = store.reload()
    except PodflowError as err:
        _echo_err(f"error: {err}")
        raise SystemExit(1)
    for key, old, new in delta:
        click.echo(f"changed {key} {old} -> {new}")


@main.group()
def trace() -> None:
    """Inspect persisted run ledgers."""


@trace.command("show")
@click.argument("run_id")
@click.option("--step", help="Only records for this step.")
@click.option("--state-dir", help="Run ledger directory.")
def trace_show(run_id, step, state_dir):
    settings = _settings_from({"state_dir": state_dir}, None)
    path = Path(settings.state_dir) / f"{run_id}.json"
    if not path.is_file():
        _echo_err(f"error: no ledger for run {run_id!r} under {settings.state_dir}")
        raise SystemExit(1)
    doc = json.loads(path.read_text(encoding="utf-8"))
    click.echo(f"run {doc['run_id']} workflow={doc['workflow_id']} status={doc['status']}")
    for record in doc.get("records", []):
        if step and record["step"] != step:
            continue
        detail = f" error={record['error_detail']}" if record.get("error_detail") else ""
        click.echo(
            f"{record['step']} attempt={record['attempt']} outcome={record['outcome']}"
            f" input={record['input_digest'][:12]} output={(record.get('output_digest') or '-')[:12]}{detail}"
        )


@main.group()
def serve() -> None:
    """Serve the REST API or the MCP adapter."""


@serve.command("api")
@click.option("--host", default=None, help="Bind host (or BIND_ADDR=host:port).")
@click.option("--port", default=None, type=int)
@click.option("--workflow", type=click.Path(exists=True))
@click.option("--agents", type=click.Path(exists=True))
@click.option("--stub-script", type=click.Path(exists=True))
@click.option("--prompts", help="Prompt source.")
@click.option("--config", type=click.Path(exists=True))
def serve_api(host, port, workflow, agents, stub_script, prompts, config):
    import os

    import uvicorn

    from .api import create_app

    bind = os.environ.get("BIND_ADDR", "")
    default_host, _, default_port = bind.partition(":")
    settings = _settings_from(
        {"workflow": workflow, "agents": agents, "stub_script": stub_script, "prompts": prompts},
        config,
    )
    app = create_app(build_stack(settings))
    uvicorn.run(app, host=host or default_host or "127.0.0.1", port=port or int(default_port or 8080))


@serve.command("mcp")
@click.option("--transport", type=click.Choice(["stdio", "http"]), default="stdio")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8765, type=int)
@click.option("--api-url", default=None, help="Workflow API base URL (or WORKFLOW_API_URL).")
def serve_mcp(transport, host, port, api_url):
    import os

    from .mcp.adapter import McpAdapter
    from .mcp.serve import serve_http, serve_stdio

    base_url = api_url or os.environ.get("WORKFLOW_API_URL", "http://127.0.0.1:8080")
    adapter = McpAdapter(base_url)
    if transport == "stdio":
        serve_stdio(adapter)
    else:
        server = serve_http(adapter, host=host, port=port)
        _echo_err(f"mcp http transport listening on {host}:{port}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            server.shutdown()


if __name__ == "__main__":
    main()
