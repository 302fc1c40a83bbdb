from __future__ import annotations

import json
from pathlib import Path

import pytest

from podflow.agents import AgentDefinition
from podflow.gateway import Gateway, ModelBinding
from podflow.gateway.stub import StubEntry, scripted_response, stub_script
from podflow.prompts import PromptStore
from podflow.runtime import Settings, build_stack
from podflow.store import ContentStore
from podflow.workflow.engine import execute_workflow

FIXTURES = Path(__file__).parent / "fixtures"

GOLDEN_INPUTS = {"topic": "emerging technology", "source_urls": ["https://news.example/"]}


def fixture_path(*parts: str) -> Path:
    return FIXTURES.joinpath(*parts)


def read_fixture(*parts: str) -> str:
    return fixture_path(*parts).read_text(encoding="utf-8")


def make_prompt_store(tmp_path: Path, prompts: dict[str, str], name: str = "prompts") -> PromptStore:
    root = tmp_path / name
    root.mkdir(parents=True, exist_ok=True)
    for key, body in prompts.items():
        target = root / f"{key}.md"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(body, encoding="utf-8")
    return PromptStore(str(root))


def stub_binding(model: str = "stub-model") -> ModelBinding:
    return ModelBinding(provider="stub", model=model)


def make_agent(name: str = "writer", prompt_key: str = "writer", model: str = "stub-model", **kwargs) -> AgentDefinition:
    return AgentDefinition(name=name, prompt_key=prompt_key, binding=stub_binding(model), **kwargs)


def gateway_with(entries: list[StubEntry]):
    provider = stub_script(entries)
    return Gateway(fallback=provider), provider


def content_entry(text: str, model: str | None = None, digest: str | None = None) -> StubEntry:
    return StubEntry(response=scripted_response(content=text), model=model, digest=digest)


@pytest.fixture
def store(tmp_path) -> ContentStore:
    return ContentStore(tmp_path / "store")


def golden_settings(tmp_path: Path, stub_name: str = "golden/stub.json") -> Settings:
    return Settings(
        stub_script=fixture_path(stub_name),
        store_dir=tmp_path / "store",
        state_dir=tmp_path / "runs",
        audit_dir=tmp_path / "audit",
    )


def run_golden(tmp_path: Path, stub_name: str = "golden/stub.json", inputs: dict | None = None):
    stack = build_stack(golden_settings(tmp_path, stub_name))
    ledger = execute_workflow(stack.spec, inputs or dict(GOLDEN_INPUTS), stack.runtime)
    return ledger, stack


def load_json(*parts: str) -> dict:
    return json.loads(read_fixture(*parts))
