from typing import Any, Optional


class AmplifierError(Exception):
    """Base class for every error raised by the workbench."""


class ConfigError(AmplifierError):
    pass


# ----------------------------------------------------------
# OpenAPI documents
# ----------------------------------------------------------
class MalformedDocument(AmplifierError):
    pass


class UnsupportedDialect(AmplifierError):
    pass


class DuplicateOperation(AmplifierError):
    pass


class UnknownReference(AmplifierError):
    pass


# ----------------------------------------------------------
# Suite documents
# ----------------------------------------------------------
class SuiteSyntaxError(AmplifierError):
    pass


class SchemaViolation(AmplifierError):
    pass


class DuplicateId(AmplifierError):
    pass


# ----------------------------------------------------------
# Execution
# ----------------------------------------------------------
class PreconditionFailed(AmplifierError):
    def __init__(self, message: str, issues: Optional[list[Any]] = None):
        super().__init__(message)
        self.issues = issues or []


class CredentialError(AmplifierError):
    pass


class LogFormatError(AmplifierError):
    pass


# ----------------------------------------------------------
# Coverage
# ----------------------------------------------------------
class AmbiguousMatch(AmplifierError):
    def __init__(self, path: str, candidates: list[str]):
        super().__init__(f"{path} matches {', '.join(candidates)} with equal specificity")
        self.path = path
        self.candidates = candidates


class DomainMismatch(AmplifierError):
    pass


# ----------------------------------------------------------
# LLM backends
# ----------------------------------------------------------
class BackendError(AmplifierError):
    pass


class ScriptExhausted(BackendError):
    pass


class MalformedToolCall(BackendError):
    pass


# ----------------------------------------------------------
# Agents
# ----------------------------------------------------------
class TemplateRenderError(AmplifierError):
    pass


class WorkflowError(AmplifierError):
    """A workflow stopped early. Carries whatever it produced before stopping."""

    def __init__(
        self,
        message: str,
        partial_trace: Any = None,
        partial_ledger: Any = None,
        partial_state: Any = None,
    ):
        super().__init__(message)
        self.partial_trace = partial_trace
        self.partial_ledger = partial_ledger
        self.partial_state = partial_state


class IterationLimitExceeded(WorkflowError):
    pass


class UnparseableFinalAnswer(WorkflowError):
    def __init__(self, message: str, raw_text: str = "", **kwargs: Any):
        super().__init__(message, **kwargs)
        self.raw_text = raw_text


class ScopeError(WorkflowError):
    pass


# ----------------------------------------------------------
# Reporting / stub
# ----------------------------------------------------------
class InconsistentInputs(AmplifierError):
    pass


class BindError(AmplifierError):
    pass
