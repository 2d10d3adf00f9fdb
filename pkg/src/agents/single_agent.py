import logging
from dataclasses import dataclass
from typing import Optional

from src.agents.session import AgentSession
from src.agents.state import AgentLimits, WorkflowTrace
from src.agents.templates import AgentRole, PromptLibrary
from src.agents.tools import OPENAPI_RETRIEVER, TEST_EXECUTOR, LocalExecutor, run_retriever, run_test_executor
from src.config import section
from src.coverage.matcher import match_template, strip_base_path
from src.errors import (
    AmplifierError,
    DuplicateId,
    IterationLimitExceeded,
    SchemaViolation,
    ScopeError,
    SuiteSyntaxError,
    UnknownReference,
    UnparseableFinalAnswer,
    WorkflowError,
)
from src.executor.target import TargetConfig
from src.llm.backends import BaseBackend
from src.llm.messages import ChatMessage
from src.llm.usage import UsageLedger
from src.openapi.model import ApiSpec
from src.suite.codec import extract_suite_document, parse_suite, render_suite
from src.suite.model import TestSuite
from src.suite.placeholders import is_symbolic_segment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WorkflowResult:
    suite: TestSuite
    ledger: UsageLedger
    trace: WorkflowTrace


def parse_final_answer(text: str) -> TestSuite:
    document = extract_suite_document(text)
    if document is None:
        raise UnparseableFinalAnswer("Final answer holds no suite document", raw_text=text)
    try:
        return parse_suite(document)
    except (SuiteSyntaxError, SchemaViolation, DuplicateId) as e:
        raise UnparseableFinalAnswer(f"Final answer is not a valid suite: {e}", raw_text=text) from e


def out_of_scope(suite: TestSuite, spec: ApiSpec, endpoint: str) -> list[str]:
    """Ids of tests whose path does not fit the endpoint template."""
    stray = []
    for test in suite.tests:
        path = strip_base_path(test.step.path.split("?", 1)[0], spec.base_path)
        if match_template(endpoint, path, wildcard=is_symbolic_segment) is None:
            stray.append(test.id)
    return stray


def render_single_agent_prompt(
    templates: PromptLibrary, spec: ApiSpec, baseline: TestSuite, files: Optional[list[str]] = None
) -> str:
    files = files if files is not None else section("agents").get("fixture_files", [])
    return templates.render(
        AgentRole.SINGLE_AGENT,
        schemas=", ".join(spec.schema_names) or "(none)",
        files=", ".join(files) or "(none)",
        baseline=render_suite(baseline).decode("utf-8"),
    )


def run_single_agent(
    spec: ApiSpec,
    endpoint: str,
    baseline: TestSuite,
    backend: BaseBackend,
    limits: Optional[AgentLimits] = None,
    target: Optional[TargetConfig] = None,
    templates: Optional[PromptLibrary] = None,
    clock=None,
    files: Optional[list[str]] = None,
) -> WorkflowResult:
    """
    ReAct loop for one endpoint with two tools: the OpenAPI retriever and the
    local test executor. The loop ends at the first reply without tool calls,
    which must hold the final suite document.
    """
    if endpoint not in spec.paths:
        raise UnknownReference(f"Endpoint {endpoint} is not in the spec")
    session = AgentSession(backend, "single", endpoint, templates, limits, clock)
    session.start()
    executor = LocalExecutor(spec, target, clock)
    tools = [OPENAPI_RETRIEVER, TEST_EXECUTOR]
    messages = [
        ChatMessage.system(render_single_agent_prompt(session.templates, spec, baseline, files)),
        ChatMessage.user(f"Endpoint under test: {endpoint}"),
    ]
    cap = session.limits.single_agent_max_calls

    try:
        for turn in range(1, cap + 1):
            logger.info("[%d/%d] single agent on %s", turn, cap, endpoint)
            reply, entry = session.call(AgentRole.SINGLE_AGENT, messages, tools)
            if not reply.tool_calls:
                suite = parse_final_answer(reply.content)
                stray = out_of_scope(suite, spec, endpoint)
                if stray:
                    raise ScopeError(f"Tests outside {endpoint}: {', '.join(stray)}")
                session.finish("completed")
                return WorkflowResult(suite, session.ledger, session.trace)

            messages.append(reply)
            for call in reply.tool_calls:
                if call.name == OPENAPI_RETRIEVER.name:
                    result = run_retriever(spec, call)
                else:
                    result = run_test_executor(executor, call)
                session.note_tool(entry, call.name, call.arguments, result)
                messages.append(ChatMessage.tool(call.call_id, result))
        raise IterationLimitExceeded(f"Single agent made {cap} model calls without a final suite for {endpoint}")
    except WorkflowError as e:
        raise session.fail(e)
    except AmplifierError as e:
        raise session.fail(WorkflowError(f"Single agent failed on {endpoint}: {e}")) from e
