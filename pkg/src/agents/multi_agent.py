"""
Two-phase multi-agent pipeline.

Planning: OpenAPI extraction, then the header/parameter/value facets (which
may run concurrently), then the planner. Generation: writer, then executor
and repair alternating until the executor agent reports the suite clean or
the repair budget runs out. There is no feedback from generation back into
planning.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from src.agents.session import AgentSession
from src.agents.single_agent import WorkflowResult, parse_final_answer
from src.agents.state import AgentLimits, AmplificationState
from src.agents.templates import FACET_ROLES, AgentRole, PromptLibrary
from src.agents.tools import OPENAPI_RETRIEVER, LocalExecutor, run_retriever
from src.config import section
from src.errors import AmplifierError, BackendError, IterationLimitExceeded, UnknownReference, WorkflowError
from src.executor.target import TargetConfig
from src.llm.backends import BaseBackend
from src.llm.messages import ChatMessage
from src.openapi.model import ApiSpec
from src.suite.codec import render_suite
from src.suite.model import TestSuite

logger = logging.getLogger(__name__)

DONE = "DONE"
CLEAN = "NO_COMPILATION_ERRORS"

FACET_FIELDS = {
    AgentRole.HEADER: "header_testcases",
    AgentRole.PARAMETER: "parameter_testcases",
    AgentRole.VALUE: "value_testcases",
}


@dataclass(frozen=True)
class ExecutorVerdict:
    clean: bool
    feedback: str


# ----------------------------------------------------------
# Planning phase
# ----------------------------------------------------------
def run_openapi_agent(session: AgentSession, spec: ApiSpec, endpoint: str) -> str:
    """Collect retriever output until the agent answers DONE."""
    prompt = session.templates.render(AgentRole.OPENAPI_EXTRACTION, endpoint_under_test=endpoint)
    messages = [ChatMessage.user(prompt)]
    references: list[str] = []
    cap = session.limits.openapi_agent_max_calls

    for turn in range(1, cap + 1):
        logger.info("[%d/%d] openapi agent on %s", turn, cap, endpoint)
        reply, entry = session.call(AgentRole.OPENAPI_EXTRACTION, messages, [OPENAPI_RETRIEVER])
        if not reply.tool_calls:
            if reply.content.strip() == DONE:
                return "\n".join(references)
            messages.append(reply)
            messages.append(ChatMessage.user("Query more references, or reply with 'DONE', nothing more."))
            continue
        messages.append(reply)
        for call in reply.tool_calls:
            result = run_retriever(spec, call)
            references.append(result.rstrip("\n"))
            session.note_tool(entry, call.name, call.arguments, result)
            messages.append(ChatMessage.tool(call.call_id, result))
    raise IterationLimitExceeded(f"OpenAPI agent did not finish within {cap} calls for {endpoint}")


def run_facet_agents(session: AgentSession, state: AmplificationState) -> tuple[str, str, str]:
    """
    Header, parameter and value agents: one call each over the same references.

    Calls overlap when the backend allows it. Results are recorded in the
    fixed order header, parameter, value; a failing facet does not discard
    the others.
    """
    prompts = {
        role: [
            ChatMessage.user(
                session.templates.render(
                    role,
                    openapi_references=state.openapi_references,
                    endpoint_under_test=state.endpoint_under_test,
                )
            )
        ]
        for role in FACET_ROLES
    }

    outcomes: dict[AgentRole, object] = {}
    if session.backend.concurrent_safe:
        with ThreadPoolExecutor(max_workers=len(FACET_ROLES)) as pool:
            futures = {role: pool.submit(session.ask, role, prompts[role]) for role in FACET_ROLES}
            for role, future in futures.items():
                try:
                    outcomes[role] = future.result()
                except AmplifierError as e:
                    outcomes[role] = e
    else:
        for role in FACET_ROLES:
            try:
                outcomes[role] = session.ask(role, prompts[role])
            except AmplifierError as e:
                outcomes[role] = e

    failures = []
    for role in FACET_ROLES:
        outcome = outcomes[role]
        if isinstance(outcome, AmplifierError):
            logger.error("%s agent failed: %s", role.value, outcome)
            failures.append((role, outcome))
            continue
        reply, usage = outcome
        session.record(role, prompts[role], reply, usage)
        setattr(state, FACET_FIELDS[role], reply.content)

    if failures:
        role, error = failures[0]
        raise BackendError(f"{role.value} agent failed: {error}") from error
    return state.header_testcases, state.parameter_testcases, state.value_testcases


def run_planner(session: AgentSession, state: AmplificationState, files: Optional[list[str]] = None) -> str:
    files = files if files is not None else section("agents").get("fixture_files", [])
    prompt = session.templates.render(
        AgentRole.PLANNER,
        openapi_references=state.openapi_references,
        header_testcases=state.header_testcases,
        parameter_testcases=state.parameter_testcases,
        value_testcases=state.value_testcases,
        files="\n".join(files) or "(none)",
    )
    reply, _ = session.call(AgentRole.PLANNER, [ChatMessage.user(prompt)])
    state.plan = reply.content
    return state.plan


# ----------------------------------------------------------
# Generation phase
# ----------------------------------------------------------
def run_writer(session: AgentSession, state: AmplificationState, baseline: TestSuite) -> bytes:
    prompt = session.templates.render(
        AgentRole.WRITER,
        baseline_suite=render_suite(baseline).decode("utf-8"),
        plan=state.plan,
    )
    reply, _ = session.call(AgentRole.WRITER, [ChatMessage.user(prompt)])
    state.suite_document = reply.content.encode("utf-8")
    return state.suite_document


def run_executor_agent(session: AgentSession, suite_document: bytes, executor: LocalExecutor) -> ExecutorVerdict:
    """
    Summarize the local executor's output with one model call.

    The suite is clean only when the agent answers with the sentinel; any other
    reply is feedback for the repair agent.
    """
    report = executor.check(suite_document)
    prompt = session.templates.render(AgentRole.EXECUTOR, execution_output=report.output)
    reply, _ = session.call(AgentRole.EXECUTOR, [ChatMessage.user(prompt)])
    if CLEAN in reply.content:
        return ExecutorVerdict(True, CLEAN)
    return ExecutorVerdict(False, reply.content)


def run_repair(session: AgentSession, state: AmplificationState, feedback: str) -> bytes:
    prompt = session.templates.render(
        AgentRole.REPAIR,
        suite_document=(state.suite_document or b"").decode("utf-8", errors="replace"),
        feedback=feedback,
    )
    reply, _ = session.call(AgentRole.REPAIR, [ChatMessage.user(prompt)])
    state.suite_document = reply.content.encode("utf-8")
    state.repair_rounds += 1
    return state.suite_document


@dataclass(frozen=True)
class MultiAgentResult(WorkflowResult):
    state: Optional[AmplificationState] = None


def run_multi_agent(
    spec: ApiSpec,
    endpoint: str,
    baseline: TestSuite,
    backend: BaseBackend,
    limits: Optional[AgentLimits] = None,
    target: Optional[TargetConfig] = None,
    templates: Optional[PromptLibrary] = None,
    clock=None,
    files: Optional[list[str]] = None,
) -> MultiAgentResult:
    if endpoint not in spec.paths:
        raise UnknownReference(f"Endpoint {endpoint} is not in the spec")
    session = AgentSession(backend, "multi", endpoint, templates, limits, clock)
    session.start()
    state = AmplificationState(endpoint_under_test=endpoint)
    executor = LocalExecutor(spec, target, clock)
    max_rounds = session.limits.max_repair_rounds

    try:
        logger.info("--- Planning %s ---", endpoint)
        state.openapi_references = run_openapi_agent(session, spec, endpoint)
        run_facet_agents(session, state)
        run_planner(session, state, files)

        logger.info("--- Generating %s ---", endpoint)
        run_writer(session, state, baseline)
        verdict = run_executor_agent(session, state.suite_document, executor)
        while not verdict.clean:
            state.executor_feedback = verdict.feedback
            if state.repair_rounds >= max_rounds:
                state.repair_limit_reached = True
                logger.warning("Repair limit (%d) reached for %s; keeping the last candidate", max_rounds, endpoint)
                break
            logger.info("[%d/%d] repairing suite for %s", state.repair_rounds + 1, max_rounds, endpoint)
            run_repair(session, state, verdict.feedback)
            verdict = run_executor_agent(session, state.suite_document, executor)

        suite = parse_final_answer(state.suite_document.decode("utf-8", errors="replace"))
    except WorkflowError as e:
        raise session.fail(e, state)
    except AmplifierError as e:
        raise session.fail(WorkflowError(f"Multi-agent run failed on {endpoint}: {e}"), state) from e

    session.finish("repair_limit_reached" if state.repair_limit_reached else "completed")
    return MultiAgentResult(suite, session.ledger, session.trace, state)
