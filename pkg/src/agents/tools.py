import json
import logging
from dataclasses import dataclass
from typing import Optional, Union

from src.errors import AmplifierError, DuplicateId, PreconditionFailed, SchemaViolation, SuiteSyntaxError
from src.executor.results import Outcome, TestResult, format_console
from src.executor.runner import execute_suite
from src.executor.target import TargetConfig
from src.llm.messages import ToolCall, ToolSpec
from src.openapi.model import ApiSpec
from src.openapi.retriever import retrieve
from src.suite.codec import extract_suite_document, parse_suite
from src.suite.linter import validate_suite

logger = logging.getLogger(__name__)

OPENAPI_RETRIEVER = ToolSpec(
    name="openapi_retriever",
    description=(
        "Look up the OpenAPI documentation. Query an endpoint with a path starting with '/' "
        "or a schema with a name starting with an uppercase letter."
    ),
    parameters={
        "type": "object",
        "properties": {"query": {"type": "string", "description": "Endpoint path or schema name"}},
        "required": ["query"],
    },
)

TEST_EXECUTOR = ToolSpec(
    name="test_executor",
    description="Validate a suite document and, when a target is configured, run it. Returns the console output.",
    parameters={
        "type": "object",
        "properties": {"suite": {"type": "string", "description": "The complete suite document (JSON text)"}},
        "required": ["suite"],
    },
)


def tool_argument(call: ToolCall, name: str) -> Optional[str]:
    arguments = json.loads(call.arguments)
    value = arguments.get(name)
    if value is None:
        return None
    return value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)


def run_retriever(spec: ApiSpec, call: ToolCall) -> str:
    query = tool_argument(call, "query")
    if not query:
        return "The openapi_retriever tool needs a 'query' argument."
    return retrieve(spec, query)


@dataclass(frozen=True)
class ExecutorReport:
    output: str
    mechanical_errors: int
    results: tuple[TestResult, ...] = ()

    @property
    def clean(self) -> bool:
        return self.mechanical_errors == 0


class LocalExecutor:
    """
    The agents' local test executor.

    Parse errors, refinement issues and runtime errors count as mechanical
    errors; assertion failures are reported but never counted. Without a
    target it is a dry run that only validates.
    """

    def __init__(self, spec: Optional[ApiSpec] = None, target: Optional[TargetConfig] = None, clock=None):
        self.spec = spec
        self.target = target
        self.clock = clock

    def check(self, document: Union[bytes, str]) -> ExecutorReport:
        text = document.decode("utf-8", errors="replace") if isinstance(document, bytes) else document
        extracted = extract_suite_document(text)
        if extracted is None:
            return ExecutorReport("PARSE ERROR: no JSON suite document found in the input\n", 1)
        try:
            suite = parse_suite(extracted)
        except (SuiteSyntaxError, SchemaViolation, DuplicateId) as e:
            return ExecutorReport(f"PARSE ERROR: {e}\n", 1)

        variables = self.target.variables if self.target else {}
        issues = validate_suite(suite, self.spec, variables)
        lines = [f"Parsed suite {suite.name!r} with {len(suite)} test(s)."]
        if issues:
            lines.append(f"Validation issues: {len(issues)}")
            lines.extend(f"- {issue}" for issue in issues)
        else:
            lines.append("Validation issues: none")

        if self.target is None:
            lines.append("Execution skipped: dry run (no target configured).")
            return ExecutorReport("\n".join(lines) + "\n", len(issues))

        try:
            results, _ = execute_suite(suite, self.target, clock=self.clock)
        except PreconditionFailed as e:
            lines.append(f"Execution refused: {e}")
            return ExecutorReport("\n".join(lines) + "\n", len(issues))
        except AmplifierError as e:
            logger.exception("Local execution failed")
            lines.append(f"Execution failed: {e}")
            return ExecutorReport("\n".join(lines) + "\n", len(issues) + 1)

        runtime_errors = sum(1 for r in results if r.outcome == Outcome.RUNTIME_ERROR)
        lines.append("Execution output:")
        output = "\n".join(lines) + "\n" + format_console(results)
        return ExecutorReport(output, len(issues) + runtime_errors, tuple(results))


def run_test_executor(executor: LocalExecutor, call: ToolCall) -> str:
    document = tool_argument(call, "suite")
    if not document:
        return "The test_executor tool needs a 'suite' argument holding the suite document."
    return executor.check(document).output
