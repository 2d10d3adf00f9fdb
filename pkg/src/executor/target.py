from dataclasses import dataclass, field
from typing import Any, Optional
from urllib.parse import urlparse

from src.config import read_config_file, section
from src.errors import ConfigError

AUTH_KINDS = ("static_bearer", "oauth2_client_credentials", "oauth2_refresh_token")


@dataclass(frozen=True)
class AuthConfig:
    """
    Where the credential comes from. Secrets are never stored here, only the
    names of the environment variables holding them (a literal `token` is
    accepted for static bearer tokens in throwaway setups).
    """

    kind: str
    token: Optional[str] = None
    token_env: Optional[str] = None
    token_url: Optional[str] = None
    client_id_env: Optional[str] = None
    client_secret_env: Optional[str] = None
    refresh_token_env: Optional[str] = None
    scope: Optional[str] = None
    header_name: str = "Authorization"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AuthConfig":
        if not isinstance(data, dict):
            raise ConfigError("auth must be an object")
        kind = data.get("kind")
        if kind not in AUTH_KINDS:
            raise ConfigError(f"auth.kind must be one of {', '.join(AUTH_KINDS)}, got {kind!r}")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"auth has unknown field(s): {', '.join(unknown)}")
        config = cls(**data)
        if kind == "static_bearer" and not (config.token or config.token_env):
            raise ConfigError("static_bearer auth needs token or token_env")
        if kind != "static_bearer":
            if not config.token_url:
                raise ConfigError(f"{kind} auth needs token_url")
            if not (config.client_id_env and config.client_secret_env):
                raise ConfigError(f"{kind} auth needs client_id_env and client_secret_env")
            if kind == "oauth2_refresh_token" and not config.refresh_token_env:
                raise ConfigError("oauth2_refresh_token auth needs refresh_token_env")
        return config


@dataclass(frozen=True)
class TargetConfig:
    base_url: str
    timeout: float = 30.0
    auth: Optional[AuthConfig] = None
    variables: dict[str, str] = field(default_factory=dict)
    body_limit: int = 65536

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TargetConfig":
        defaults = section("executor")
        base_url = str(data.get("base_url", "")).rstrip("/")
        parsed = urlparse(base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ConfigError(f"base_url must be an absolute http(s) URL, got {data.get('base_url')!r}")

        try:
            timeout = float(data.get("timeout", defaults.get("timeout", 30)))
            body_limit = int(data.get("body_limit", defaults.get("body_limit", 65536)))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid executor setting: {e}") from e
        if timeout <= 0:
            raise ConfigError("timeout must be > 0")
        if body_limit <= 0:
            raise ConfigError("body_limit must be > 0")

        variables = data.get("variables") or {}
        if not isinstance(variables, dict):
            raise ConfigError("variables must be an object")

        auth = data.get("auth")
        return cls(
            base_url=base_url,
            timeout=timeout,
            auth=AuthConfig.from_dict(auth) if auth else None,
            variables={str(k): str(v) for k, v in variables.items()},
            body_limit=body_limit,
        )

    @classmethod
    def from_file(cls, path: str) -> "TargetConfig":
        return cls.from_dict(read_config_file(path))

    def with_base_url(self, base_url: str) -> "TargetConfig":
        return TargetConfig(
            base_url=base_url.rstrip("/"),
            timeout=self.timeout,
            auth=self.auth,
            variables=self.variables,
            body_limit=self.body_limit,
        )
