from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Mapping, Optional

HTTP_METHODS = ("GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS")

DEFAULT_STATUS = "default"


class Dialect(str, Enum):
    V2 = "v2"
    V3 = "v3"


class ParameterLocation(str, Enum):
    PATH = "path"
    QUERY = "query"
    HEADER = "header"
    COOKIE = "cookie"


@dataclass(frozen=True)
class ParameterDescriptor:
    name: str
    location: ParameterLocation
    required: bool
    enum_values: Optional[tuple[str, ...]] = None
    description: str = ""
    type_name: str = ""

    @property
    def key(self) -> tuple[str, str]:
        # Header names compare case-insensitively.
        name = self.name.lower() if self.location == ParameterLocation.HEADER else self.name
        return (name, self.location.value)


@dataclass(frozen=True)
class ResponseDescriptor:
    """
    One documented response entry.

    `status` is "200", "2XX" (a range) or "default".
    """

    status: str
    media_types: frozenset[str] = frozenset()
    description: str = ""
    schema: str = ""

    @property
    def is_default(self) -> bool:
        return self.status == DEFAULT_STATUS

    @property
    def code(self) -> Optional[int]:
        return int(self.status) if self.status.isdigit() else None

    @property
    def status_class(self) -> Optional[int]:
        if self.is_default:
            return None
        return int(self.status[0])


@dataclass(frozen=True)
class OperationDescriptor:
    path: str
    method: str
    parameters: tuple[ParameterDescriptor, ...] = ()
    request_types: frozenset[str] = frozenset()
    documented_responses: tuple[ResponseDescriptor, ...] = ()
    body_required: bool = False
    request_schema: str = ""
    operation_id: str = ""
    summary: str = ""
    referenced_schemas: tuple[str, ...] = ()

    @property
    def key(self) -> tuple[str, str]:
        return (self.path, self.method)

    def parameter(self, name: str, location: ParameterLocation) -> Optional[ParameterDescriptor]:
        for parameter in self.parameters:
            if parameter.location == location and parameter.name == name:
                return parameter
        return None

    def response(self, status: str) -> Optional[ResponseDescriptor]:
        for response in self.documented_responses:
            if response.status == status:
                return response
        return None


@dataclass(frozen=True)
class ApiSpec:
    title: str
    version_dialect: Dialect
    base_path: str
    paths: tuple[str, ...]
    operations: tuple[OperationDescriptor, ...]
    schemas: Mapping[str, Any] = field(default_factory=lambda: MappingProxyType({}))
    schema_refs: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: MappingProxyType({}))

    def operation(self, path: str, method: str) -> Optional[OperationDescriptor]:
        method = method.upper()
        for operation in self.operations:
            if operation.path == path and operation.method == method:
                return operation
        return None

    def operations_for(self, path: str) -> list[OperationDescriptor]:
        return [op for op in self.operations if op.path == path]

    @property
    def schema_names(self) -> list[str]:
        return list(self.schemas.keys())
