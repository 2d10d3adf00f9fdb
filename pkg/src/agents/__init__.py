from .multi_agent import (
    CLEAN,
    DONE,
    ExecutorVerdict,
    MultiAgentResult,
    run_executor_agent,
    run_facet_agents,
    run_multi_agent,
    run_openapi_agent,
    run_planner,
    run_repair,
    run_writer,
)
from .session import AgentSession
from .single_agent import WorkflowResult, out_of_scope, parse_final_answer, run_single_agent
from .state import AgentLimits, AmplificationState, ToolInvocation, TraceEntry, WorkflowTrace
from .templates import FACET_ROLES, PLANNING_ROLES, AgentRole, PromptLibrary, PromptTemplate
from .tools import OPENAPI_RETRIEVER, TEST_EXECUTOR, ExecutorReport, LocalExecutor

WORKFLOWS = {
    "single": run_single_agent,
    "multi": run_multi_agent,
}
