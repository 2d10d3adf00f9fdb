from dataclasses import dataclass, field
from typing import Any, Optional

from src.config import read_config_file, resolve_relative, section
from src.errors import ConfigError
from src.openapi.model import HTTP_METHODS, ApiSpec, OperationDescriptor


def _string_map(value: Any, where: str) -> dict[str, str]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object")
    return {str(k): str(v) for k, v in value.items()}


def documents_status(operation: OperationDescriptor, code: int) -> bool:
    for response in operation.documented_responses:
        if response.code == code:
            return True
        if response.code is None and not response.is_default and response.status_class == code // 100:
            return True
    return False


@dataclass(frozen=True)
class StubOverride:
    """Force a status on one operation when the request carries the given query/header values."""

    path: str
    method: str
    status: int
    media_type: Optional[str] = None
    query: dict[str, str] = field(default_factory=dict)
    headers: dict[str, str] = field(default_factory=dict)
    body: Optional[str] = None
    undocumented: bool = False

    def matches(self, query: dict[str, list[str]], headers: dict[str, str]) -> bool:
        for name, value in self.query.items():
            if value not in query.get(name, []):
                return False
        lowered = {k.lower(): v for k, v in headers.items()}
        for name, value in self.headers.items():
            if lowered.get(name.lower()) != value:
                return False
        return True

    @classmethod
    def from_dict(cls, data: Any, index: int) -> "StubOverride":
        where = f"overrides[{index}]"
        if not isinstance(data, dict):
            raise ConfigError(f"{where} must be an object")
        try:
            status = int(data["status"])
            path = str(data["path"])
            method = str(data.get("method", "GET")).upper()
        except KeyError as e:
            raise ConfigError(f"{where} is missing {e}") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{where}.status must be an integer") from e
        if not 100 <= status <= 599:
            raise ConfigError(f"{where}.status {status} is not an HTTP status")
        if method not in HTTP_METHODS:
            raise ConfigError(f"{where}.method {method} is not an HTTP method")
        when = data.get("when") or {}
        return cls(
            path=path,
            method=method,
            status=status,
            media_type=data.get("mediaType"),
            query=_string_map(when.get("query"), f"{where}.when.query"),
            headers=_string_map(when.get("headers"), f"{where}.when.headers"),
            body=data.get("body"),
            undocumented=bool(data.get("undocumented", False)),
        )


@dataclass(frozen=True)
class StubConfig:
    spec: ApiSpec
    host: str = "127.0.0.1"
    port: int = 8080
    overrides: tuple[StubOverride, ...] = ()
    auth_token: Optional[str] = None
    access_log: Optional[str] = None
    body_limit: int = 65536

    def __post_init__(self):
        for override in self.overrides:
            operation = self.spec.operation(override.path, override.method)
            if operation is None:
                raise ConfigError(f"Override targets {override.method} {override.path}, which the spec does not document")
            if not override.undocumented and not documents_status(operation, override.status):
                raise ConfigError(
                    f"Override forces {override.status} on {override.method} {override.path}, which is not documented; "
                    "set \"undocumented\": true to inject it anyway"
                )

    @classmethod
    def from_dict(cls, spec: ApiSpec, data: Optional[dict[str, Any]] = None, relative_to: str = "") -> "StubConfig":
        data = data or {}
        defaults = section("stub")
        overrides = data.get("overrides") or []
        if not isinstance(overrides, list):
            raise ConfigError("overrides must be a list")
        try:
            port = int(data.get("port", defaults.get("port", 8080)))
            body_limit = int(data.get("body_limit", section("executor").get("body_limit", 65536)))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid stub setting: {e}") from e
        if not 0 <= port <= 65535:
            raise ConfigError(f"port {port} is out of range")
        access_log = data.get("access_log")
        return cls(
            spec=spec,
            host=str(data.get("host", defaults.get("host", "127.0.0.1"))),
            port=port,
            overrides=tuple(StubOverride.from_dict(item, i) for i, item in enumerate(overrides)),
            auth_token=data.get("auth_token"),
            access_log=resolve_relative(access_log, relative_to) if relative_to else access_log,
            body_limit=body_limit,
        )

    @classmethod
    def from_file(cls, spec: ApiSpec, path: str) -> "StubConfig":
        return cls.from_dict(spec, read_config_file(path), relative_to=path)

    def with_port(self, port: int) -> "StubConfig":
        return StubConfig(self.spec, self.host, port, self.overrides, self.auth_token, self.access_log, self.body_limit)
