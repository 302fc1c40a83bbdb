import json

import pytest

from podflow.agents import AgentCatalog
from podflow.canonical import digest_bytes
from podflow.errors import (
    InputSchemaMismatch,
    InvalidWorkflow,
    RateLimited,
    UnresolvedBinding,
)
from podflow.gateway import Gateway
from podflow.gateway.stub import entry_from_jsonable, stub_script
from podflow.retry import RetryPolicy
from podflow.store import ContentStore
from podflow.workflow.engine import (
    FunctionRegistry,
    WorkflowRuntime,
    execute_workflow,
    resolve_bindings,
)
from podflow.workflow.spec import InputField, StepSpec, WorkflowSpec

from conftest import content_entry, make_prompt_store


def mini_catalog() -> AgentCatalog:
    return AgentCatalog.from_jsonable(
        {
            "agents": [
                {"name": "writer", "prompt": "writer", "binding": {"provider": "stub", "model": "m-writer"}},
                {"name": "member_a", "prompt": "writer", "binding": {"provider": "stub", "model": "m-a"}},
                {"name": "member_b", "prompt": "writer", "binding": {"provider": "stub", "model": "m-b"}},
                {
                    "name": "json_writer",
                    "prompt": "writer",
                    "binding": {"provider": "stub", "model": "m-json"},
                    "output_contract": "strict_json",
                    "output_schema": {"type": "object"},
                },
            ]
        }
    )


def make_runtime(tmp_path, entries, functions=None, quorum=None):
    registry = FunctionRegistry()
    for name, fn in (functions or {}).items():
        registry.register(name, fn)
    return WorkflowRuntime(
        registry=registry,
        catalog=mini_catalog(),
        gateway=Gateway(fallback=stub_script(entries)),
        prompt_store=make_prompt_store(tmp_path, {"writer": "about {{topic}}"}),
        store=ContentStore(tmp_path / "store"),
        consortium_quorum=quorum,
    )


def spec_of(*steps, inputs=(InputField("topic", "text"),)) -> WorkflowSpec:
    return WorkflowSpec(id="demo", version="1.0.0", steps=tuple(steps), input_schema=tuple(inputs))


AGENT_STEP = StepSpec(name="draft", kind="agent", agent="writer", bindings={"topic": "input:topic"})


# ---------------------------------------------------------------------------
# resolve_bindings
# ---------------------------------------------------------------------------


def test_resolve_input_binding():
    step = StepSpec(name="s", kind="function", function="f", bindings={"topic": "input:topic"})
    assert resolve_bindings(step, {"topic": "AI"}, {}) == {"topic": "AI"}


def test_resolve_step_binding():
    step = StepSpec(name="s", kind="function", function="f", bindings={"drafts": "step:consortium.output"})
    assert resolve_bindings(step, {}, {"consortium": ["d1", "d2"]}) == {"drafts": ["d1", "d2"]}


def test_resolve_missing_source():
    step = StepSpec(name="s", kind="function", function="f", bindings={"x": "step:missing.output"})
    with pytest.raises(UnresolvedBinding):
        resolve_bindings(step, {}, {})


def test_resolve_is_pure():
    step = StepSpec(name="s", kind="function", function="f", bindings={"a": "input:topic"})
    inputs = {"topic": "AI"}
    assert resolve_bindings(step, inputs, {}) == resolve_bindings(step, inputs, {})


# ---------------------------------------------------------------------------
# execution basics
# ---------------------------------------------------------------------------


def test_agent_fanout_function_pipeline(tmp_path):
    collected = {}

    def pack(ctx, drafts, first):
        collected["drafts"] = drafts
        collected["first"] = first
        return {"count": len(drafts.drafts)}

    spec = spec_of(
        AGENT_STEP,
        StepSpec(name="panel", kind="fan_out", group=("member_b", "member_a"), bindings={"topic": "input:topic"}),
        StepSpec(
            name="pack",
            kind="function",
            function="pack",
            bindings={"drafts": "step:panel.output", "first": "step:draft.output"},
        ),
    )
    runtime = make_runtime(
        tmp_path,
        [
            content_entry("writer draft", model="m-writer"),
            content_entry("draft A", model="m-a"),
            content_entry("draft B", model="m-b"),
        ],
        functions={"pack": pack},
    )
    ledger = execute_workflow(spec, {"topic": "AI"}, runtime)
    assert ledger.status == "succeeded"
    assert [r.step for r in ledger.records] == ["draft", "panel", "pack"]
    assert collected["first"] == "writer draft"
    assert collected["drafts"].agent_names() == ["member_a", "member_b"]
    assert json.loads(runtime.store.get(ledger.artifacts["pack"].location)) == {"count": 2}


def test_zero_input_workflow_executes(tmp_path):
    spec = spec_of(
        StepSpec(name="only", kind="function", function="noop"),
        inputs=(),
    )
    runtime = make_runtime(tmp_path, [], functions={"noop": lambda ctx: "done"})
    ledger = execute_workflow(spec, {}, runtime)
    assert ledger.status == "succeeded"
    assert ledger.inputs == {}


def test_invalid_workflow_never_executes(tmp_path):
    spec = spec_of(StepSpec(name="s", kind="function", function="unregistered"))
    runtime = make_runtime(tmp_path, [])
    with pytest.raises(InvalidWorkflow):
        execute_workflow(spec, {"topic": "x"}, runtime)


@pytest.mark.parametrize(
    "inputs",
    [{}, {"topic": "x", "extra": "y"}, {"topic": 42}, {"topic": ["not", "text"]}],
)
def test_input_schema_mismatch(tmp_path, inputs):
    runtime = make_runtime(tmp_path, [content_entry("d", model="m-writer")])
    with pytest.raises(InputSchemaMismatch):
        execute_workflow(spec_of(AGENT_STEP), inputs, runtime)


# ---------------------------------------------------------------------------
# retries and failure
# ---------------------------------------------------------------------------


def retry_spec(max_attempts=3):
    return spec_of(
        StepSpec(
            name="draft",
            kind="agent",
            agent="writer",
            bindings={"topic": "input:topic"},
            retry=RetryPolicy(max_attempts=max_attempts, backoff_initial_s=0.01, backoff_multiplier=2.0),
        )
    )


def test_rate_limited_twice_then_success(tmp_path):
    entries = [
        entry_from_jsonable({"model": "m-writer", "error": {"kind": "rate_limited", "retry_after_s": 0.05}}),
        entry_from_jsonable({"model": "m-writer", "error": {"kind": "rate_limited"}}),
        content_entry("finally", model="m-writer"),
    ]
    runtime = make_runtime(tmp_path, entries)
    sleeps = []
    ledger = execute_workflow(retry_spec(), {"topic": "x"}, runtime, sleep=sleeps.append)
    assert ledger.status == "succeeded"
    outcomes = [(r.attempt, r.outcome) for r in ledger.records]
    assert outcomes == [(1, "retryable_error"), (2, "retryable_error"), (3, "ok")]
    # Retry-after hint (0.05) beats the policy backoff (0.01) on the first pause.
    assert sleeps[0] == pytest.approx(0.05)
    assert sleeps[1] == pytest.approx(0.02)


def test_retry_exhaustion_fails_run(tmp_path):
    entries = [
        entry_from_jsonable({"model": "m-writer", "error": {"kind": "timeout"}}) for _ in range(3)
    ]
    runtime = make_runtime(tmp_path, entries)
    ledger = execute_workflow(retry_spec(3), {"topic": "x"}, runtime, sleep=lambda s: None)
    assert ledger.status == "failed"
    assert len(ledger.records) == 3
    assert all(r.outcome == "retryable_error" for r in ledger.records)


def test_fatal_error_truncates_run(tmp_path):
    def boom(ctx, **kw):
        raise ValueError("logic bug")

    spec = spec_of(
        AGENT_STEP,
        StepSpec(name="explode", kind="function", function="boom", bindings={"v": "step:draft.output"}),
        StepSpec(name="after", kind="function", function="noop", bindings={"v": "step:explode.output"}),
    )
    runtime = make_runtime(
        tmp_path,
        [content_entry("draft", model="m-writer")],
        functions={"boom": boom, "noop": lambda ctx, v: v},
    )
    ledger = execute_workflow(spec, {"topic": "x"}, runtime)
    assert ledger.status == "failed"
    assert [r.step for r in ledger.records] == ["draft", "explode"]
    assert ledger.records[-1].outcome == "fatal_error"
    assert "ValueError" in ledger.records[-1].error_detail


def test_fatal_stub_error_consumes_single_attempt(tmp_path):
    entries = [entry_from_jsonable({"model": "m-writer", "error": {"kind": "auth"}})]
    runtime = make_runtime(tmp_path, entries)
    ledger = execute_workflow(retry_spec(3), {"topic": "x"}, runtime)
    assert ledger.status == "failed"
    assert len(ledger.records) == 1
    assert ledger.records[0].outcome == "fatal_error"


def test_retry_bound_holds_for_all_steps(tmp_path):
    entries = [
        entry_from_jsonable({"model": "m-writer", "error": {"kind": "timeout"}}) for _ in range(5)
    ]
    runtime = make_runtime(tmp_path, entries)
    ledger = execute_workflow(retry_spec(2), {"topic": "x"}, runtime, sleep=lambda s: None)
    per_step: dict[str, int] = {}
    for record in ledger.records:
        per_step[record.step] = per_step.get(record.step, 0) + 1
    assert all(count <= 2 for count in per_step.values())


# ---------------------------------------------------------------------------
# determinism and artifacts
# ---------------------------------------------------------------------------


def run_twice(tmp_path, factory):
    ledgers = []
    for sub in ("one", "two"):
        base = tmp_path / sub
        base.mkdir()
        spec, runtime, inputs = factory(base)
        ledgers.append(execute_workflow(spec, inputs, runtime))
    return ledgers


def test_determinism_after_erasing_volatile(tmp_path):
    def factory(base):
        runtime = make_runtime(
            base,
            [
                content_entry("writer draft", model="m-writer"),
                content_entry("draft A", model="m-a"),
                content_entry("draft B", model="m-b"),
            ],
            functions={"pack": lambda ctx, drafts: {"n": len(drafts.drafts)}},
        )
        spec = spec_of(
            AGENT_STEP,
            StepSpec(name="panel", kind="fan_out", group=("member_a", "member_b"), bindings={"topic": "input:topic"}),
            StepSpec(name="pack", kind="function", function="pack", bindings={"drafts": "step:panel.output"}),
        )
        return spec, runtime, {"topic": "AI"}

    first, second = run_twice(tmp_path, factory)
    assert first.run_id != second.run_id
    assert first.canonical(erase_volatile=True) == second.canonical(erase_volatile=True)
    assert first.canonical() != second.canonical()


def test_fan_out_declaration_order_irrelevant(tmp_path):
    def factory_for(order):
        def factory(base):
            runtime = make_runtime(
                base,
                [content_entry("draft A", model="m-a"), content_entry("draft B", model="m-b")],
            )
            spec = spec_of(StepSpec(name="panel", kind="fan_out", group=order, bindings={"topic": "input:topic"}))
            return spec, runtime, {"topic": "AI"}

        return factory

    (tmp_path / "x").mkdir()
    forward, = run_twice(tmp_path / "x", factory_for(("member_a", "member_b")))[:1]
    (tmp_path / "y").mkdir()
    reversed_, = run_twice(tmp_path / "y", factory_for(("member_b", "member_a")))[:1]
    fwd = json.loads(forward.canonical(erase_volatile=True))
    rev = json.loads(reversed_.canonical(erase_volatile=True))
    assert fwd["artifacts"] == rev["artifacts"]
    assert [r["output_digest"] for r in fwd["records"]] == [r["output_digest"] for r in rev["records"]]


def test_every_artifact_digest_matches_stored_bytes(tmp_path):
    runtime = make_runtime(
        tmp_path,
        [
            content_entry("writer draft", model="m-writer"),
            content_entry("draft A", model="m-a"),
            content_entry("draft B", model="m-b"),
        ],
        functions={"pack": lambda ctx, drafts: {"n": len(drafts.drafts)}},
    )
    spec = spec_of(
        AGENT_STEP,
        StepSpec(name="panel", kind="fan_out", group=("member_a", "member_b"), bindings={"topic": "input:topic"}),
        StepSpec(name="pack", kind="function", function="pack", bindings={"drafts": "step:panel.output"}),
    )
    ledger = execute_workflow(spec, {"topic": "AI"}, runtime)
    assert ledger.artifacts
    for name, ref in ledger.artifacts.items():
        assert digest_bytes(runtime.store.get(ref.location)) == ref.digest, name


def test_agent_step_records_usage_and_prompt_artifact(tmp_path):
    runtime = make_runtime(tmp_path, [content_entry("writer draft", model="m-writer")])
    ledger = execute_workflow(spec_of(AGENT_STEP), {"topic": "AI"}, runtime)
    record = ledger.records[0]
    assert record.token_usage == {"prompt_tokens": 0, "completion_tokens": 0}
    prompt_ref = ledger.artifacts["draft.prompt"]
    assert runtime.store.get(prompt_ref.location) == b"about AI"


def test_strict_json_agent_output_stored_as_json(tmp_path):
    spec = spec_of(StepSpec(name="draft", kind="agent", agent="json_writer", bindings={"topic": "input:topic"}))
    runtime = make_runtime(tmp_path, [content_entry('{"ok": true}', model="m-json")])
    ledger = execute_workflow(spec, {"topic": "AI"}, runtime)
    assert ledger.artifacts["draft"].media_type == "application/json"


def test_observer_sees_every_transition(tmp_path):
    runtime = make_runtime(tmp_path, [content_entry("writer draft", model="m-writer")])
    statuses = []
    execute_workflow(
        spec_of(AGENT_STEP),
        {"topic": "AI"},
        runtime,
        observer=lambda ledger: statuses.append((ledger.status, len(ledger.records))),
    )
    assert statuses[0] == ("running", 0)
    assert statuses[-1] == ("succeeded", 1)


def test_ledger_erase_nulls_volatile_fields(tmp_path):
    runtime = make_runtime(tmp_path, [content_entry("writer draft", model="m-writer")])
    ledger = execute_workflow(spec_of(AGENT_STEP), {"topic": "AI"}, runtime)
    erased = json.loads(ledger.canonical(erase_volatile=True))
    assert erased["run_id"] is None
    assert erased["started_at"] is None
    assert erased["ended_at"] is None
    assert all(r["duration_s"] is None for r in erased["records"])
