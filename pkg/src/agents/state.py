from dataclasses import dataclass, field
from typing import Any, Optional

from src.config import section
from src.errors import ConfigError
from src.llm.usage import UsageEntry
from src.utils import parse_rfc3339


@dataclass(frozen=True)
class AgentLimits:
    single_agent_max_calls: int = 20
    openapi_agent_max_calls: int = 10
    max_repair_rounds: int = 3

    @classmethod
    def from_dict(cls, data: Optional[dict[str, Any]] = None) -> "AgentLimits":
        merged = {**section("agents"), **(data or {})}
        try:
            limits = cls(
                single_agent_max_calls=int(merged.get("single_agent_max_calls", 20)),
                openapi_agent_max_calls=int(merged.get("openapi_agent_max_calls", 10)),
                max_repair_rounds=int(merged.get("max_repair_rounds", 3)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid agent limit: {e}") from e
        if limits.single_agent_max_calls < 1 or limits.openapi_agent_max_calls < 1:
            raise ConfigError("agent call caps must be >= 1")
        if limits.max_repair_rounds < 0:
            raise ConfigError("max_repair_rounds must be >= 0")
        return limits


@dataclass
class AmplificationState:
    """Blackboard of one multi-agent run; fields fill in pipeline order."""

    endpoint_under_test: str
    openapi_references: Optional[str] = None
    header_testcases: Optional[str] = None
    parameter_testcases: Optional[str] = None
    value_testcases: Optional[str] = None
    plan: Optional[str] = None
    suite_document: Optional[bytes] = None
    executor_feedback: Optional[str] = None
    repair_rounds: int = 0
    repair_limit_reached: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "endpointUnderTest": self.endpoint_under_test,
            "openapiReferences": self.openapi_references,
            "headerTestcases": self.header_testcases,
            "parameterTestcases": self.parameter_testcases,
            "valueTestcases": self.value_testcases,
            "plan": self.plan,
            "suiteDocument": self.suite_document.decode("utf-8", errors="replace") if self.suite_document else None,
            "executorFeedback": self.executor_feedback,
            "repairRounds": self.repair_rounds,
            "repairLimitReached": self.repair_limit_reached,
        }


@dataclass(frozen=True)
class ToolInvocation:
    name: str
    arguments: str
    result_digest: str

    def to_dict(self) -> dict[str, str]:
        return {"name": self.name, "arguments": self.arguments, "resultDigest": self.result_digest}


@dataclass
class TraceEntry:
    role: str
    prompt_digest: str
    response_digest: str
    usage: UsageEntry
    response_text: str = ""
    tool_invocations: list[ToolInvocation] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role,
            "promptDigest": self.prompt_digest,
            "responseDigest": self.response_digest,
            "usage": self.usage.to_dict(),
            "response": self.response_text,
            "toolInvocations": [t.to_dict() for t in self.tool_invocations],
        }


@dataclass
class WorkflowTrace:
    mode: str
    endpoint: str
    started: str = ""
    finished: str = ""
    entries: list[TraceEntry] = field(default_factory=list)
    outcome: str = "running"

    @property
    def roles(self) -> list[str]:
        return [e.role for e in self.entries]

    def minutes(self) -> float:
        if not self.started or not self.finished:
            return 0.0
        return (parse_rfc3339(self.finished) - parse_rfc3339(self.started)).total_seconds() / 60

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "endpoint": self.endpoint,
            "started": self.started,
            "finished": self.finished,
            "outcome": self.outcome,
            "entries": [e.to_dict() for e in self.entries],
        }
