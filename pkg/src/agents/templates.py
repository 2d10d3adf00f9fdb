import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from src.errors import ConfigError, TemplateRenderError

PROMPT_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "prompts")
SLOT = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class AgentRole(str, Enum):
    SINGLE_AGENT = "single_agent"
    OPENAPI_EXTRACTION = "openapi_extraction"
    HEADER = "header"
    PARAMETER = "parameter"
    VALUE = "value"
    PLANNER = "planner"
    WRITER = "writer"
    EXECUTOR = "executor"
    REPAIR = "repair"


PLANNING_ROLES = (
    AgentRole.OPENAPI_EXTRACTION,
    AgentRole.HEADER,
    AgentRole.PARAMETER,
    AgentRole.VALUE,
    AgentRole.PLANNER,
)
FACET_ROLES = (AgentRole.HEADER, AgentRole.PARAMETER, AgentRole.VALUE)

# Slots that must carry text, not just be present.
NON_EMPTY_SLOTS = {
    AgentRole.WRITER: ("plan",),
    AgentRole.REPAIR: ("suite_document", "feedback"),
}


@dataclass(frozen=True)
class PromptTemplate:
    role: AgentRole
    body: str

    @property
    def slots(self) -> list[str]:
        return list(dict.fromkeys(SLOT.findall(self.body)))

    def render(self, **values: Any) -> str:
        missing = [s for s in self.slots if values.get(s) is None]
        if missing:
            raise TemplateRenderError(f"{self.role.value} prompt is missing slot(s): {', '.join(missing)}")
        empty = [s for s in NON_EMPTY_SLOTS.get(self.role, ()) if not str(values[s]).strip()]
        if empty:
            raise TemplateRenderError(f"{self.role.value} prompt needs non-empty slot(s): {', '.join(empty)}")
        # Single pass: slot values are inserted verbatim and never re-scanned.
        return SLOT.sub(lambda m: str(values[m.group(1)]), self.body)


def _read(directory: str, name: str) -> Optional[str]:
    path = os.path.join(directory, f"{name}.txt")
    if not os.path.isfile(path):
        return None
    with open(path, "r", encoding="utf-8") as f:
        return f.read().rstrip("\n")


class PromptLibrary:
    """The nine role templates plus the shared suite-format fragment."""

    def __init__(self, templates: dict[AgentRole, PromptTemplate], suite_format: str):
        self.templates = templates
        self.suite_format = suite_format

    def __getitem__(self, role: AgentRole) -> PromptTemplate:
        return self.templates[role]

    def render(self, role: AgentRole, **values: Any) -> str:
        template = self.templates[role]
        if "suite_format" in template.slots:
            values.setdefault("suite_format", self.suite_format)
        return template.render(**values)

    @classmethod
    def load(cls, override_dir: Optional[str] = None) -> "PromptLibrary":
        """Packaged templates, with any <role>.txt in override_dir taking precedence."""
        if override_dir and not os.path.isdir(override_dir):
            raise ConfigError(f"Prompt directory not found: {override_dir}")
        templates = {}
        for role in AgentRole:
            body = (_read(override_dir, role.value) if override_dir else None) or _read(PROMPT_DIR, role.value)
            if body is None:
                raise ConfigError(f"No prompt template for role {role.value}")
            templates[role] = PromptTemplate(role, body)
        suite_format = (_read(override_dir, "suite_format") if override_dir else None) or _read(
            PROMPT_DIR, "suite_format"
        )
        return cls(templates, suite_format or "")
