import json

import pytest

from podflow.agents import (
    AgentCatalog,
    AgentDefinition,
    ToolParameter,
    ToolSchema,
    parse_tool_call,
    run_agent,
    validate_agent,
)
from podflow.canonical import digest_text
from podflow.errors import MalformedToolCall, OutputContractViolation, ToolRoundsExceeded
from podflow.gateway import ToolCall
from podflow.gateway.stub import StubEntry, scripted_response, stub_script

from conftest import content_entry, gateway_with, make_agent, make_prompt_store

SCRAPE_TOOL = ToolSchema(
    name="scrape_markdown",
    description="Fetch one page as Markdown.",
    parameters=(ToolParameter("url", "text", True), ToolParameter("max_bytes", "integer", False)),
)


def tool_call_entry(name: str, arguments: dict, call_id: str = "call_1") -> StubEntry:
    return StubEntry(response=scripted_response(tool_call={"name": name, "arguments": arguments, "call_id": call_id}))


# ---------------------------------------------------------------------------
# parse_tool_call
# ---------------------------------------------------------------------------


def test_parse_valid_call():
    request = parse_tool_call(ToolCall("scrape_markdown", {"url": "https://a.example"}), SCRAPE_TOOL)
    assert request.tool_name == "scrape_markdown"
    assert request.arguments == {"url": "https://a.example"}


def test_parse_wrong_name():
    with pytest.raises(MalformedToolCall) as err:
        parse_tool_call(ToolCall("scrape_md", {"url": "x"}), SCRAPE_TOOL)
    assert err.value.reason == "wrong_name"


def test_parse_missing_required():
    with pytest.raises(MalformedToolCall) as err:
        parse_tool_call(ToolCall("scrape_markdown", {}), SCRAPE_TOOL)
    assert err.value.reason == "missing_required"


def test_parse_unknown_argument():
    with pytest.raises(MalformedToolCall) as err:
        parse_tool_call(ToolCall("scrape_markdown", {"url": "x", "depth": 2}), SCRAPE_TOOL)
    assert err.value.reason == "unknown_argument"


def test_parse_type_mismatch():
    with pytest.raises(MalformedToolCall) as err:
        parse_tool_call(ToolCall("scrape_markdown", {"url": 7}), SCRAPE_TOOL)
    assert err.value.reason == "type_mismatch"


def test_parse_boolean_is_not_integer():
    schema = ToolSchema("t", "", (ToolParameter("n", "integer", True),))
    with pytest.raises(MalformedToolCall) as err:
        parse_tool_call(ToolCall("t", {"n": True}), schema)
    assert err.value.reason == "type_mismatch"


def test_optional_parameter_may_be_absent():
    request = parse_tool_call(ToolCall("scrape_markdown", {"url": "x"}), SCRAPE_TOOL)
    assert "max_bytes" not in request.arguments


# ---------------------------------------------------------------------------
# definitions and catalog validation
# ---------------------------------------------------------------------------


def test_two_tool_definition_is_unrepresentable():
    # The typed shape has a single optional tool; lists only exist in the
    # serialized catalog, where validation rejects them.
    entry = {
        "name": "scrape_and_publish",
        "prompt": "scrape",
        "binding": {"provider": "stub", "model": "m"},
        "tools": [
            {"name": "scrape_markdown", "parameters": []},
            {"name": "publish_markdown", "parameters": []},
        ],
    }
    report = validate_agent(entry)
    assert "SingleToolViolation" in report.codes()
    catalog = AgentCatalog([entry])
    with pytest.raises(ValueError):
        catalog.get("scrape_and_publish")


def test_zero_and_one_tool_entries_are_clean(tmp_path):
    store = make_prompt_store(tmp_path, {"p": "hello {{x}}"})
    zero = {"name": "a", "prompt": "p", "binding": {"provider": "stub", "model": "m"}}
    one = {
        "name": "b",
        "prompt": "p",
        "binding": {"provider": "stub", "model": "m"},
        "tool": {"name": "scrape_markdown", "parameters": [{"name": "url", "type": "text"}]},
    }
    assert validate_agent(zero, store).ok
    assert validate_agent(one, store).ok


def test_missing_prompt_finding(tmp_path):
    store = make_prompt_store(tmp_path, {"p": "x"})
    entry = {"name": "a", "prompt": "nope", "binding": {"provider": "stub", "model": "m"}}
    report = validate_agent(entry, store)
    assert "MissingPrompt" in report.codes()


def test_strict_json_requires_schema():
    entry = {"name": "a", "prompt": "p", "binding": {"provider": "stub", "model": "m"}, "output_contract": "strict_json"}
    assert "MissingSchema" in validate_agent(entry).codes()
    with pytest.raises(ValueError):
        AgentDefinition(name="a", prompt_key="p", binding=None, output_contract="strict_json")  # type: ignore[arg-type]


def test_catalog_loads_schema_relative_to_file(tmp_path):
    schema_dir = tmp_path / "cat"
    schema_dir.mkdir()
    (schema_dir / "out.json").write_text(json.dumps({"type": "array"}), encoding="utf-8")
    (schema_dir / "catalog.json").write_text(
        json.dumps(
            {
                "agents": [
                    {
                        "name": "a",
                        "prompt": "p",
                        "binding": {"provider": "stub", "model": "m"},
                        "output_contract": "strict_json",
                        "output_schema": "out.json",
                    }
                ]
            }
        ),
        encoding="utf-8",
    )
    catalog = AgentCatalog.load(schema_dir / "catalog.json")
    assert catalog.get("a").output_schema == {"type": "array"}


# ---------------------------------------------------------------------------
# run_agent
# ---------------------------------------------------------------------------


def test_zero_tool_agent_never_invokes_executor(tmp_path):
    store = make_prompt_store(tmp_path, {"writer": "write about {{topic}}"})
    gateway, _ = gateway_with([content_entry("an essay")])
    calls = []
    result = run_agent(make_agent(), {"topic": "x"}, store, gateway, tool_executor=lambda r: calls.append(r) or "")
    assert result.text == "an essay"
    assert result.tool_trace == []
    assert calls == []
    assert result.rendered_prompt == "write about x"


def test_tool_loop_single_round(tmp_path):
    store = make_prompt_store(tmp_path, {"scrape": "scrape {{url}}"})
    gateway, provider = gateway_with(
        [tool_call_entry("scrape_markdown", {"url": "https://a.example"}), content_entry("done: # A")]
    )
    agent = make_agent(name="scraper", prompt_key="scrape", tool=SCRAPE_TOOL)

    seen = []

    def executor(request):
        seen.append(request)
        return "# A\n\nbody\n"

    result = run_agent(agent, {"url": "https://a.example"}, store, gateway, tool_executor=executor)
    assert result.text == "done: # A"
    assert len(result.tool_trace) == 1
    request, output_digest = result.tool_trace[0]
    assert request.tool_name == "scrape_markdown"
    assert output_digest == digest_text("# A\n\nbody\n")
    assert seen == [request]
    # Second model call must carry the assistant tool call and tool result.
    follow_up = provider.requests[1].messages
    assert follow_up[1].tool_call.name == "scrape_markdown"
    assert follow_up[2].role == "tool"
    assert follow_up[2].content == "# A\n\nbody\n"


def test_tool_trace_replays_against_schema(tmp_path):
    store = make_prompt_store(tmp_path, {"scrape": "scrape {{url}}"})
    gateway, _ = gateway_with(
        [tool_call_entry("scrape_markdown", {"url": "https://a.example"}), content_entry("ok")]
    )
    agent = make_agent(name="scraper", prompt_key="scrape", tool=SCRAPE_TOOL)
    result = run_agent(agent, {"url": "https://a.example"}, store, gateway, tool_executor=lambda r: "body")
    for request, _ in result.tool_trace:
        replay = parse_tool_call(ToolCall(request.tool_name, dict(request.arguments)), agent.tool)
        assert replay.tool_name == request.tool_name


def test_tool_call_with_no_tool_attached_is_malformed(tmp_path):
    store = make_prompt_store(tmp_path, {"writer": "write {{topic}}"})
    gateway, _ = gateway_with([tool_call_entry("scrape_markdown", {"url": "x"})])
    with pytest.raises(MalformedToolCall):
        run_agent(make_agent(), {"topic": "t"}, store, gateway)


def test_tool_rounds_bounded(tmp_path):
    store = make_prompt_store(tmp_path, {"scrape": "scrape {{url}}"})
    entries = [tool_call_entry("scrape_markdown", {"url": "https://a.example"}) for _ in range(3)]
    gateway, _ = gateway_with(entries)
    agent = make_agent(name="scraper", prompt_key="scrape", tool=SCRAPE_TOOL, max_tool_rounds=2)
    with pytest.raises(ToolRoundsExceeded):
        run_agent(agent, {"url": "https://a.example"}, store, gateway, tool_executor=lambda r: "body")


def test_strict_json_accepts_valid_document(tmp_path):
    store = make_prompt_store(tmp_path, {"veo": "build {{script}}"})
    gateway, _ = gateway_with([content_entry('{"items": []}')])
    agent = make_agent(
        name="builder",
        prompt_key="veo",
        output_contract="strict_json",
        output_schema={"type": "object", "properties": {"items": {"type": "array"}}, "required": ["items"]},
    )
    result = run_agent(agent, {"script": "s"}, store, gateway)
    assert json.loads(result.text) == {"items": []}


@pytest.mark.parametrize(
    "bad_output",
    [
        "Here is your JSON: {\"items\": []}",  # prose mixed with JSON
        '{"wrong": true}',  # schema violation
        "{not json at all",
    ],
)
def test_strict_json_violations_surface(tmp_path, bad_output):
    store = make_prompt_store(tmp_path, {"veo": "build {{script}}"})
    gateway, _ = gateway_with([content_entry(bad_output)])
    agent = make_agent(
        name="builder",
        prompt_key="veo",
        output_contract="strict_json",
        output_schema={"type": "object", "properties": {"items": {"type": "array"}}, "required": ["items"]},
    )
    with pytest.raises(OutputContractViolation) as err:
        run_agent(agent, {"script": "s"}, store, gateway)
    assert err.value.retryable


def test_named_output_validator_runs(tmp_path):
    store = make_prompt_store(tmp_path, {"veo": "build {{script}}"})
    gateway, _ = gateway_with([content_entry('{"items": []}')])

    def reject(doc):
        raise OutputContractViolation("semantic check failed")

    agent = make_agent(
        name="builder",
        prompt_key="veo",
        output_contract="strict_json",
        output_schema={"type": "object"},
        output_validator="sum_check",
    )
    with pytest.raises(OutputContractViolation):
        run_agent(agent, {"script": "s"}, store, gateway, validators={"sum_check": reject})


def test_token_usage_accumulates_across_rounds(tmp_path):
    store = make_prompt_store(tmp_path, {"scrape": "scrape {{url}}"})
    entries = [
        StubEntry(
            response=scripted_response(
                tool_call={"name": "scrape_markdown", "arguments": {"url": "x"}}, usage={"prompt_tokens": 10, "completion_tokens": 2}
            )
        ),
        StubEntry(response=scripted_response(content="done", usage={"prompt_tokens": 20, "completion_tokens": 3})),
    ]
    gateway, _ = gateway_with(entries)
    agent = make_agent(name="scraper", prompt_key="scrape", tool=SCRAPE_TOOL)
    result = run_agent(agent, {"url": "x"}, store, gateway, tool_executor=lambda r: "body")
    assert result.token_usage == {"prompt_tokens": 30, "completion_tokens": 5}
