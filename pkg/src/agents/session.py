import json
import threading
from typing import Optional, Sequence

from src.agents.state import AgentLimits, ToolInvocation, TraceEntry, WorkflowTrace
from src.agents.templates import AgentRole, PromptLibrary
from src.errors import WorkflowError
from src.llm.backends import BaseBackend, complete
from src.llm.messages import ChatMessage, ToolSpec
from src.llm.usage import UsageEntry, UsageLedger, record_usage
from src.utils import SystemClock, rfc3339, sha256_digest


def _digest_messages(messages: Sequence[ChatMessage]) -> str:
    payload = json.dumps([m.to_dict() for m in messages], ensure_ascii=False, sort_keys=True)
    return sha256_digest(payload.encode("utf-8"))


def _digest_response(message: ChatMessage) -> str:
    return sha256_digest(json.dumps(message.to_dict(), ensure_ascii=False, sort_keys=True).encode("utf-8"))


class AgentSession:
    """
    Everything one workflow run owns: backend, prompts, limits, clock, and
    the trace and ledger it accumulates. One session per endpoint per mode.
    """

    def __init__(
        self,
        backend: BaseBackend,
        mode: str,
        endpoint: str,
        templates: Optional[PromptLibrary] = None,
        limits: Optional[AgentLimits] = None,
        clock=None,
    ):
        self.backend = backend
        self.templates = templates or PromptLibrary.load()
        self.limits = limits or AgentLimits.from_dict()
        self.clock = clock or SystemClock()
        self.trace = WorkflowTrace(mode=mode, endpoint=endpoint)
        self.ledger = UsageLedger()
        self._lock = threading.Lock()

    def start(self):
        self.trace.started = rfc3339(self.clock.now())

    def finish(self, outcome: str):
        self.trace.finished = rfc3339(self.clock.now())
        self.trace.outcome = outcome

    def ask(
        self, role: AgentRole, messages: Sequence[ChatMessage], tools: Optional[Sequence[ToolSpec]] = None
    ) -> tuple[ChatMessage, UsageEntry]:
        """One model call, not yet recorded."""
        return complete(self.backend, messages, tools, role=role.value, clock=self.clock)

    def record(self, role: AgentRole, messages: Sequence[ChatMessage], reply: ChatMessage, usage: UsageEntry) -> TraceEntry:
        entry = TraceEntry(
            role=role.value,
            prompt_digest=_digest_messages(messages),
            response_digest=_digest_response(reply),
            usage=usage,
            response_text=reply.content,
        )
        with self._lock:
            self.trace.entries.append(entry)
            self.ledger = record_usage(self.ledger, role.value, usage)
        return entry

    def call(
        self, role: AgentRole, messages: Sequence[ChatMessage], tools: Optional[Sequence[ToolSpec]] = None
    ) -> tuple[ChatMessage, TraceEntry]:
        reply, usage = self.ask(role, messages, tools)
        return reply, self.record(role, messages, reply, usage)

    @staticmethod
    def note_tool(entry: TraceEntry, name: str, arguments: str, result: str):
        entry.tool_invocations.append(ToolInvocation(name, arguments, sha256_digest(result.encode("utf-8"))))

    def fail(self, error: WorkflowError, state=None) -> WorkflowError:
        """Attach what has been produced so far to a workflow error."""
        self.finish("failed")
        error.partial_trace = self.trace
        error.partial_ledger = self.ledger
        if state is not None:
            error.partial_state = state
        return error
