import json
import logging
import os
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import requests

from src.config import deep_merge, read_config_file, resolve_relative, section
from src.errors import BackendError, ConfigError, MalformedToolCall, ScriptExhausted
from src.llm.messages import ChatMessage, Role, ToolCall, ToolSpec
from src.llm.usage import EnergyModel, PricingModel, UsageEntry
from src.utils import SystemClock, load_json_file

logger = logging.getLogger(__name__)

BACKEND_KINDS = ("http_chat", "scripted")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "http_chat"
    endpoint: Optional[str] = None
    model_name: str = "gpt-4o-mini"
    temperature: float = 0.0
    api_key_env: str = "LLM_API_KEY"
    retries: int = 1
    retry_delay: float = 2.0
    timeout: float = 120.0
    pricing: PricingModel = PricingModel()
    energy: EnergyModel = EnergyModel()
    script: Optional[str] = None
    scripts: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict[str, Any], relative_to: Optional[str] = None) -> "BackendConfig":
        merged = deep_merge(section("llm"), data)
        kind = merged.get("kind")
        if kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {', '.join(BACKEND_KINDS)}, got {kind!r}")
        try:
            temperature = float(merged.get("temperature", 0))
            retries = int(merged.get("retries", 1))
            retry_delay = float(merged.get("retry_delay", 2))
            timeout = float(merged.get("timeout", 120))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid backend setting: {e}") from e
        if temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if retries < 0:
            raise ConfigError("retries must be >= 0")

        script = merged.get("script")
        scripts = merged.get("scripts") or {}
        if not isinstance(scripts, dict):
            raise ConfigError("scripts must map endpoints to script files")
        if relative_to:
            script = resolve_relative(script, relative_to)
            scripts = {k: resolve_relative(v, relative_to) for k, v in scripts.items()}
        if kind == "scripted" and not (script or scripts):
            raise ConfigError("scripted backend needs script or scripts")
        if kind == "http_chat" and not merged.get("endpoint"):
            raise ConfigError("http_chat backend needs an endpoint")

        return cls(
            kind=kind,
            endpoint=merged.get("endpoint"),
            model_name=str(merged.get("model_name", "gpt-4o-mini")),
            temperature=temperature,
            api_key_env=str(merged.get("api_key_env", "LLM_API_KEY")),
            retries=retries,
            retry_delay=retry_delay,
            timeout=timeout,
            pricing=PricingModel.from_dict(merged.get("pricing")),
            energy=EnergyModel.from_value(merged.get("energy_wh_per_token", 0.00006)),
            script=script,
            scripts=dict(scripts),
        )

    @classmethod
    def from_file(cls, path: str) -> "BackendConfig":
        return cls.from_dict(read_config_file(path), relative_to=path)


class BaseBackend(ABC):
    """A chat model. Implementations return (assistant message, input tokens, output tokens)."""

    # Whether overlapping calls keep transcripts deterministic.
    concurrent_safe = True

    def __init__(self, config: BackendConfig):
        self.config = config

    @abstractmethod
    def chat(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolSpec], role: Optional[str]
    ) -> tuple[ChatMessage, int, int]:
        pass


# ----------------------------------------------------------
# Scripted backend
# ----------------------------------------------------------
def _scripted_tool_calls(raw: Any, position: int) -> tuple[ToolCall, ...]:
    calls = []
    for j, item in enumerate(raw or []):
        arguments = item.get("arguments", {})
        if not isinstance(arguments, str):
            arguments = json.dumps(arguments, ensure_ascii=False, sort_keys=True)
        calls.append(
            ToolCall(
                name=str(item.get("name", "")),
                arguments=arguments,
                call_id=str(item.get("callId") or f"call_{position}_{j}"),
            )
        )
    return tuple(calls)


class ScriptedBackend(BaseBackend):
    """
    Replays scripted responses with scripted token counts.

    A script is either one ordered list shared by every call, or a mapping
    from agent role to its own list (with an optional "default" list). Only
    per-role scripts stay deterministic when calls overlap.
    """

    def __init__(self, config: BackendConfig, script: Any):
        super().__init__(config)
        if isinstance(script, list):
            self.queues = {"default": list(script)}
            self.concurrent_safe = False
        elif isinstance(script, dict):
            self.queues = {str(k): list(v) for k, v in script.items()}
            self.concurrent_safe = True
        else:
            raise ConfigError("script must be a list of responses or a mapping of role to responses")
        self.positions = {name: 0 for name in self.queues}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, config: BackendConfig, path: str) -> "ScriptedBackend":
        try:
            return cls(config, load_json_file(path))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read script {path}: {e}") from e

    def chat(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolSpec], role: Optional[str]
    ) -> tuple[ChatMessage, int, int]:
        with self._lock:
            queue_name = role if role in self.queues else "default"
            queue = self.queues.get(queue_name, [])
            position = self.positions.get(queue_name, 0)
            if position >= len(queue):
                raise ScriptExhausted(f"Script has no response left for role {role or 'default'!r}")
            self.positions[queue_name] = position + 1
            entry = queue[position]
        if not isinstance(entry, dict):
            raise BackendError(f"Scripted response #{position} is not an object")
        content = entry.get("content")
        if content is not None and not isinstance(content, str):
            # Structured content (e.g. a suite object) is replayed as JSON text.
            content = json.dumps(content, ensure_ascii=False, indent=2)
        message = ChatMessage.assistant(
            content=content or "",
            tool_calls=_scripted_tool_calls(entry.get("toolCalls"), position),
        )
        return message, int(entry.get("inputTokens", 0)), int(entry.get("outputTokens", 0))


# ----------------------------------------------------------
# OpenAI-compatible chat completions
# ----------------------------------------------------------
def _wire_message(message: ChatMessage) -> dict[str, Any]:
    wire: dict[str, Any] = {"role": message.role.value, "content": message.content}
    if message.tool_calls:
        wire["tool_calls"] = [
            {"id": c.call_id, "type": "function", "function": {"name": c.name, "arguments": c.arguments}}
            for c in message.tool_calls
        ]
    if message.role == Role.TOOL:
        wire["tool_call_id"] = message.tool_call_id
    return wire


class HttpChatBackend(BaseBackend):
    def _api_key(self) -> str:
        key = os.getenv(self.config.api_key_env)
        if not key:
            raise BackendError(f"Missing env var: {self.config.api_key_env}")
        return key

    def request_body(self, messages: Sequence[ChatMessage], tools: Sequence[ToolSpec]) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [_wire_message(m) for m in messages],
        }
        if tools:
            body["tools"] = [t.to_wire() for t in tools]
        return body

    def _post(self, body: dict[str, Any]) -> dict[str, Any]:
        attempts = self.config.retries + 1
        headers = {"Authorization": f"Bearer {self._api_key()}", "Content-Type": "application/json"}
        for attempt in range(attempts):
            logger.debug("POST %s (Attempt %d/%d)", self.config.endpoint, attempt + 1, attempts)
            try:
                response = requests.post(self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout)
                if response.status_code == 429 or response.status_code >= 500:
                    raise requests.exceptions.HTTPError(f"HTTP {response.status_code}", response=response)
                if response.status_code >= 400:
                    raise BackendError(f"Chat endpoint returned HTTP {response.status_code}: {response.text[:200]}")
                return response.json()
            except (requests.exceptions.RequestException, ValueError) as e:
                logger.warning("Error calling %s: %s", self.config.endpoint, e)
                if attempt < attempts - 1:
                    logger.info("Retrying in %s seconds...", self.config.retry_delay)
                    time.sleep(self.config.retry_delay)
                else:
                    raise BackendError(f"Chat endpoint failed after {attempts} attempt(s): {e}") from e
        raise BackendError("Chat endpoint was not called")

    def chat(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolSpec], role: Optional[str]
    ) -> tuple[ChatMessage, int, int]:
        payload = self._post(self.request_body(messages, tools))
        try:
            message = payload["choices"][0]["message"]
            calls = tuple(
                ToolCall(
                    name=c["function"]["name"],
                    arguments=c["function"].get("arguments") or "{}",
                    call_id=c.get("id") or f"call_{i}",
                )
                for i, c in enumerate(message.get("tool_calls") or [])
            )
        except (KeyError, IndexError, TypeError) as e:
            raise BackendError(f"Unexpected chat response shape: {e}") from e
        usage = payload.get("usage") or {}
        if "prompt_tokens" not in usage:
            logger.warning("Chat response carries no usage report; recording 0 tokens")
        return (
            ChatMessage.assistant(content=message.get("content") or "", tool_calls=calls),
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
        )


def create_backend(config: BackendConfig, endpoint: Optional[str] = None) -> BaseBackend:
    if config.kind == "scripted":
        path = config.scripts.get(endpoint) if endpoint else None
        path = path or config.script
        if not path:
            raise ConfigError(f"No script configured for endpoint {endpoint}")
        return ScriptedBackend.from_file(config, path)
    return HttpChatBackend(config)


# ----------------------------------------------------------
# The single model-call primitive
# ----------------------------------------------------------
def _check_tool_calls(message: ChatMessage, tools: Sequence[ToolSpec]):
    names = {t.name for t in tools}
    for call in message.tool_calls:
        if call.name not in names:
            raise MalformedToolCall(f"Unknown tool {call.name!r}; available: {', '.join(sorted(names)) or 'none'}")
        try:
            arguments = json.loads(call.arguments)
        except json.JSONDecodeError as e:
            raise MalformedToolCall(f"Arguments of {call.name} are not JSON: {e}") from e
        if not isinstance(arguments, dict):
            raise MalformedToolCall(f"Arguments of {call.name} must be a JSON object")


def complete(
    backend: BaseBackend,
    messages: Sequence[ChatMessage],
    tools: Optional[Sequence[ToolSpec]] = None,
    role: Optional[str] = None,
    clock=None,
) -> tuple[ChatMessage, UsageEntry]:
    if not messages:
        raise ValueError("complete() needs at least one message")
    if messages[0].role not in (Role.SYSTEM, Role.USER):
        raise ValueError("the first message must be a system or user message")
    clock = clock or SystemClock()
    tools = list(tools or [])

    started = clock.monotonic()
    message, input_tokens, output_tokens = backend.chat(messages, tools, role)
    wall_time = clock.monotonic() - started

    _check_tool_calls(message, tools)
    return message, UsageEntry(role or "", input_tokens, output_tokens, wall_time)
