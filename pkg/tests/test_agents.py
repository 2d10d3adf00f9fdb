import json

import pytest

from src.agents import (
    CLEAN,
    FACET_ROLES,
    PLANNING_ROLES,
    AgentLimits,
    AgentRole,
    AgentSession,
    AmplificationState,
    LocalExecutor,
    PromptLibrary,
    run_executor_agent,
    run_multi_agent,
    run_planner,
    run_single_agent,
    run_writer,
)
from src.errors import (
    ConfigError,
    IterationLimitExceeded,
    ScopeError,
    TemplateRenderError,
    UnknownReference,
    UnparseableFinalAnswer,
    WorkflowError,
)
from src.llm import BackendConfig, ScriptedBackend
from src.openapi import retrieve
from src.suite import read_suite_file, render_suite
from src.utils import load_json_file, sha256_digest
from tests.conftest import fixture_path

PING_TEST = {
    "id": "ping-ok",
    "name": "GET /ping answers 200",
    "request": {"method": "GET", "path": "/ping"},
    "assertions": [{"kind": "status_equals", "expected": 200}],
}
TOKEN_TEST = {
    "id": "ping-with-token",
    "name": "GET /ping with a token",
    "request": {"method": "GET", "path": "/ping", "headers": {"Authorization": "Bearer <Access Token Here>"}},
    "assertions": [{"kind": "status_equals", "expected": 200}],
}


def backend_for(script) -> ScriptedBackend:
    return ScriptedBackend(BackendConfig(kind="scripted", script="inline"), script)


def reply(content="", tokens=(10, 5), **extra):
    return {"content": content, "inputTokens": tokens[0], "outputTokens": tokens[1], **extra}


def retriever_call(query, tokens=(10, 5)):
    return {"toolCalls": [{"name": "openapi_retriever", "arguments": {"query": query}}], "inputTokens": tokens[0], "outputTokens": tokens[1]}


def planning_script(**overrides):
    script = {
        "openapi_extraction": [reply("DONE")],
        "header": [reply("headers: none")],
        "parameter": [reply("parameters: none")],
        "value": [reply("values: none")],
        "planner": [reply("1. GET /ping expects 200")],
        "writer": [reply({"suite": "ping", "tests": [PING_TEST]})],
        "executor": [reply(CLEAN)],
    }
    script.update(overrides)
    return script


@pytest.fixture
def baseline():
    return read_suite_file(fixture_path("suites", "baseline.json"))


@pytest.fixture
def templates():
    return PromptLibrary.load()


class TestSingleAgent:
    def test_retrieve_then_answer(self, ping_spec, baseline, fixed_clock):
        backend = backend_for(load_json_file(fixture_path("scripts", "single-ping.json")))
        result = run_single_agent(ping_spec, "/ping", baseline, backend, clock=fixed_clock)

        assert result.suite.ids == ["ping-ok"]
        assert result.trace.roles == ["single_agent", "single_agent"]
        assert result.trace.outcome == "completed"
        assert len(result.ledger.entries) == 2
        assert (result.ledger.input_tokens, result.ledger.output_tokens) == (1210 + 1480, 18 + 142)

        invocation = result.trace.entries[0].tool_invocations[0]
        assert invocation.name == "openapi_retriever"
        assert invocation.result_digest == sha256_digest(retrieve(ping_spec, "/ping").encode("utf-8"))

    def test_executor_tool_dry_run(self, ping_spec, baseline, fixed_clock):
        suite_text = render_suite(baseline).decode("utf-8")
        backend = backend_for(
            [
                {"toolCalls": [{"name": "test_executor", "arguments": {"suite": suite_text}}]},
                reply({"suite": "ping", "tests": [PING_TEST]}),
            ]
        )
        result = run_single_agent(ping_spec, "/ping", baseline, backend, clock=fixed_clock)
        report = LocalExecutor(ping_spec).check(suite_text)
        assert "Execution skipped: dry run" in report.output
        invocation = result.trace.entries[0].tool_invocations[0]
        assert invocation.result_digest == sha256_digest(report.output.encode("utf-8"))

    def test_tests_outside_the_endpoint(self, toy_spec, baseline, fixed_clock):
        stray = dict(PING_TEST, id="items-list", request={"method": "GET", "path": "/items"})
        backend = backend_for([reply({"suite": "ping", "tests": [PING_TEST, stray]})])
        with pytest.raises(ScopeError) as excinfo:
            run_single_agent(toy_spec, "/ping", baseline, backend, clock=fixed_clock)
        assert excinfo.value.partial_trace.outcome == "failed"
        assert len(excinfo.value.partial_ledger.entries) == 1

    def test_symbolic_segments_stay_in_scope(self, toy_spec, baseline, fixed_clock):
        bound = dict(PING_TEST, request={"method": "GET", "path": "/items/${itemId}"})
        backend = backend_for([reply({"suite": "items", "tests": [bound]})])
        result = run_single_agent(toy_spec, "/items/{itemId}", baseline, backend, clock=fixed_clock)
        assert result.suite.ids == ["ping-ok"]

    def test_unparseable_answer(self, ping_spec, baseline, fixed_clock):
        backend = backend_for([reply("I could not write any tests.")])
        with pytest.raises(UnparseableFinalAnswer) as excinfo:
            run_single_agent(ping_spec, "/ping", baseline, backend, clock=fixed_clock)
        assert excinfo.value.raw_text == "I could not write any tests."

    def test_call_cap(self, ping_spec, baseline, fixed_clock):
        backend = backend_for([retriever_call("/ping")] * 3)
        limits = AgentLimits.from_dict({"single_agent_max_calls": 2})
        with pytest.raises(IterationLimitExceeded) as excinfo:
            run_single_agent(ping_spec, "/ping", baseline, backend, limits=limits, clock=fixed_clock)
        assert len(excinfo.value.partial_trace.entries) == 2

    def test_unknown_tool_fails_the_workflow(self, ping_spec, baseline, fixed_clock):
        backend = backend_for([{"toolCalls": [{"name": "shell", "arguments": {"cmd": "ls"}}]}])
        with pytest.raises(WorkflowError, match="shell"):
            run_single_agent(ping_spec, "/ping", baseline, backend, clock=fixed_clock)

    def test_unknown_endpoint(self, ping_spec, baseline):
        with pytest.raises(UnknownReference):
            run_single_agent(ping_spec, "/pong", baseline, backend_for([]))


class TestMultiAgent:
    def test_full_pipeline(self, ping_spec, baseline, fixed_clock):
        backend = backend_for(load_json_file(fixture_path("scripts", "multi-ping.json")))
        result = run_multi_agent(ping_spec, "/ping", baseline, backend, clock=fixed_clock)

        assert result.trace.roles == [
            "openapi_extraction",
            "openapi_extraction",
            "header",
            "parameter",
            "value",
            "planner",
            "writer",
            "executor",
        ]
        assert result.trace.outcome == "completed"
        assert result.suite.ids == ["ping-ok"]
        assert result.state.openapi_references == retrieve(ping_spec, "/ping").rstrip("\n")
        assert result.state.header_testcases == "- GET /ping needs no headers; expect 200."
        assert result.state.plan == "1. GET /ping expects 200 with a JSON body."
        assert result.state.repair_rounds == 0
        assert result.ledger.input_tokens == 310 + 420 + 520 * 3 + 700 + 900 + 400

    def test_planning_precedes_generation(self, ping_spec, baseline, fixed_clock):
        result = run_multi_agent(ping_spec, "/ping", baseline, backend_for(planning_script()), clock=fixed_clock)
        planning = {r.value for r in PLANNING_ROLES}
        roles = result.trace.roles
        last_planning = max(i for i, role in enumerate(roles) if role in planning)
        first_generation = min(i for i, role in enumerate(roles) if role not in planning)
        assert last_planning < first_generation
        assert len(roles) == 7
        assert roles.count("writer") == 1

    def test_facet_prompts_put_references_first(self, templates):
        for role in FACET_ROLES:
            prompt = templates.render(role, openapi_references="REFERENCES", endpoint_under_test="/ping")
            assert prompt.startswith("REFERENCES\n")
            assert "/ping" in prompt

    def test_failing_facet_keeps_the_others(self, ping_spec, baseline, fixed_clock):
        script = planning_script()
        del script["value"]
        with pytest.raises(WorkflowError, match="value agent failed") as excinfo:
            run_multi_agent(ping_spec, "/ping", baseline, backend_for(script), clock=fixed_clock)
        state = excinfo.value.partial_state
        assert state.header_testcases == "headers: none"
        assert state.parameter_testcases == "parameters: none"
        assert state.value_testcases is None
        assert excinfo.value.partial_trace.roles == ["openapi_extraction", "header", "parameter"]

    def test_openapi_agent_is_capped(self, ping_spec, baseline, fixed_clock):
        script = planning_script(openapi_extraction=[retriever_call("/ping")] * 3)
        limits = AgentLimits.from_dict({"openapi_agent_max_calls": 3})
        with pytest.raises(IterationLimitExceeded):
            run_multi_agent(ping_spec, "/ping", baseline, backend_for(script), limits=limits, clock=fixed_clock)

    def test_openapi_agent_collects_recursive_references(self, petstore_spec, baseline, fixed_clock):
        script = planning_script(
            openapi_extraction=[
                retriever_call("/pet"),
                retriever_call("Pet"),
                {"toolCalls": [
                    {"name": "openapi_retriever", "arguments": {"query": "Category"}},
                    {"name": "openapi_retriever", "arguments": {"query": "Tag"}},
                ]},
                reply("DONE"),
            ],
            writer=[reply({"suite": "pet", "tests": [dict(PING_TEST, request={"method": "GET", "path": "/pet"})]})],
        )
        result = run_multi_agent(petstore_spec, "/pet", baseline, backend_for(script), clock=fixed_clock)
        references = result.state.openapi_references
        for header in ("Endpoint /pet", "Schema Pet", "Schema Category", "Schema Tag"):
            assert header in references
        assert references.index("Schema Category") < references.index("Schema Tag")

    def test_repair_until_clean(self, ping_spec, baseline, fixed_clock):
        script = planning_script(
            writer=[reply({"suite": "ping", "tests": [TOKEN_TEST]})],
            executor=[reply("ping-with-token still has a placeholder"), reply(CLEAN)],
            repair=[reply({"suite": "ping", "tests": [PING_TEST]})],
        )
        result = run_multi_agent(ping_spec, "/ping", baseline, backend_for(script), clock=fixed_clock)
        assert result.state.repair_rounds == 1
        assert result.state.executor_feedback == "ping-with-token still has a placeholder"
        assert result.trace.roles[-3:] == ["executor", "repair", "executor"]
        assert result.suite.ids == ["ping-ok"]

    def test_repair_limit_keeps_last_candidate(self, ping_spec, baseline, fixed_clock):
        script = planning_script(
            writer=[reply({"suite": "ping", "tests": [TOKEN_TEST]})],
            executor=[reply("still broken")] * 4,
            repair=[reply({"suite": "ping", "tests": [dict(TOKEN_TEST, id=f"round-{n}")]}) for n in (1, 2, 3)],
        )
        result = run_multi_agent(ping_spec, "/ping", baseline, backend_for(script), clock=fixed_clock)
        assert result.state.repair_limit_reached
        assert result.state.repair_rounds == 3
        assert result.trace.outcome == "repair_limit_reached"
        assert result.trace.roles.count("executor") == 4
        assert result.trace.roles.count("repair") == 3
        assert result.suite.ids == ["round-3"]

    def test_zero_repair_rounds(self, ping_spec, baseline, fixed_clock):
        script = planning_script(
            writer=[reply({"suite": "ping", "tests": [TOKEN_TEST]})],
            executor=[reply("still broken")],
        )
        limits = AgentLimits.from_dict({"max_repair_rounds": 0})
        result = run_multi_agent(ping_spec, "/ping", baseline, backend_for(script), limits=limits, clock=fixed_clock)
        assert result.state.repair_limit_reached
        assert "repair" not in result.trace.roles

    def test_runs_are_reproducible(self, ping_spec, baseline, fixed_clock):
        first = run_multi_agent(ping_spec, "/ping", baseline, backend_for(planning_script()), clock=fixed_clock)
        second = run_multi_agent(ping_spec, "/ping", baseline, backend_for(planning_script()), clock=fixed_clock)
        assert first.trace.to_dict() == second.trace.to_dict()
        assert render_suite(first.suite) == render_suite(second.suite)
        assert first.ledger == second.ledger


class TestStages:
    def session(self, script, templates, fixed_clock):
        return AgentSession(backend_for(script), "multi", "/ping", templates, clock=fixed_clock)

    def test_planner_needs_every_facet(self, templates, fixed_clock):
        session = self.session({"planner": [reply("plan")]}, templates, fixed_clock)
        state = AmplificationState("/ping", openapi_references="refs", header_testcases="h", parameter_testcases="p")
        with pytest.raises(TemplateRenderError, match="value_testcases"):
            run_planner(session, state)
        assert session.trace.entries == []
        assert session.backend.positions["planner"] == 0

    def test_planner_lists_files(self, templates, fixed_clock):
        session = self.session({"planner": [reply("plan")]}, templates, fixed_clock)
        state = AmplificationState(
            "/ping", openapi_references="refs", header_testcases="h", parameter_testcases="p", value_testcases="v"
        )
        assert run_planner(session, state, files=["a.png", "b.txt"]) == "plan"
        assert state.plan == "plan"

    def test_writer_needs_a_plan(self, templates, fixed_clock, baseline):
        session = self.session({"writer": [reply("{}")]}, templates, fixed_clock)
        with pytest.raises(TemplateRenderError):
            run_writer(session, AmplificationState("/ping", plan="   "), baseline)
        assert session.trace.entries == []

    def test_writer_stores_candidate(self, templates, fixed_clock, baseline):
        session = self.session({"writer": [reply('{"tests": []}')]}, templates, fixed_clock)
        state = AmplificationState("/ping", plan="1. test")
        assert run_writer(session, state, baseline) == b'{"tests": []}'
        assert state.suite_document == b'{"tests": []}'

    @pytest.mark.parametrize(
        "answer, tests, clean",
        [
            (CLEAN, [TOKEN_TEST], True),
            ("Test ping-ok looks odd", [PING_TEST], False),
            ("Fix the placeholder in ping-with-token", [TOKEN_TEST], False),
        ],
    )
    def test_executor_verdict(self, templates, fixed_clock, ping_spec, answer, tests, clean):
        session = self.session({"executor": [reply(answer)]}, templates, fixed_clock)
        document = json.dumps({"suite": "ping", "tests": tests}).encode("utf-8")
        verdict = run_executor_agent(session, document, LocalExecutor(ping_spec))
        assert verdict.clean is clean
        assert verdict.feedback == (CLEAN if clean else answer)


class TestPromptLibrary:
    def test_every_role_has_a_template(self, templates):
        for role in AgentRole:
            assert templates[role].body

    def test_missing_slot(self, templates):
        with pytest.raises(TemplateRenderError, match="endpoint_under_test"):
            templates.render(AgentRole.OPENAPI_EXTRACTION)

    def test_slot_values_are_not_rescanned(self, templates):
        prompt = templates.render(AgentRole.OPENAPI_EXTRACTION, endpoint_under_test="/items/{itemId}")
        assert "'/items/{itemId}'" in prompt

    def test_suite_format_is_shared(self, templates):
        prompt = templates.render(AgentRole.WRITER, baseline_suite="{}", plan="1. test")
        assert templates.suite_format in prompt

    def test_override_directory(self, tmp_path):
        (tmp_path / "planner.txt").write_text("Plan for {openapi_references}", encoding="utf-8")
        library = PromptLibrary.load(str(tmp_path))
        assert library.render(
            AgentRole.PLANNER,
            openapi_references="refs",
        ) == "Plan for refs"
        assert library[AgentRole.WRITER].body == PromptLibrary.load()[AgentRole.WRITER].body

    def test_missing_override_directory(self, tmp_path):
        with pytest.raises(ConfigError):
            PromptLibrary.load(str(tmp_path / "nope"))


class TestLimits:
    @pytest.mark.parametrize(
        "data", [{"single_agent_max_calls": 0}, {"openapi_agent_max_calls": "many"}, {"max_repair_rounds": -1}]
    )
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            AgentLimits.from_dict(data)

    def test_defaults(self):
        assert AgentLimits.from_dict() == AgentLimits(20, 10, 3)
