import logging
import os
import threading
from abc import ABC, abstractmethod
from typing import Optional

import requests

from src.errors import CredentialError
from src.executor.target import AuthConfig
from src.utils import SystemClock

logger = logging.getLogger(__name__)

# Refresh a little before the advertised expiry.
EXPIRY_MARGIN = 30.0


class BaseAuthProvider(ABC):
    """
    Produces the credential header value for authenticate=true steps.

    The credential is minted lazily and cached until it expires. Token
    endpoint traffic is harness traffic and never reaches the execution log.
    """

    def __init__(self, config: AuthConfig, timeout: float = 30.0, session=None, clock=None):
        self.config = config
        self.timeout = timeout
        self.session = session or requests.Session()
        self.clock = clock or SystemClock()
        self._credential: Optional[str] = None
        self._expires_at: Optional[float] = None
        self._lock = threading.Lock()

    @property
    def header_name(self) -> str:
        return self.config.header_name

    def credential(self) -> str:
        with self._lock:
            if self._credential is None or (
                self._expires_at is not None and self.clock.monotonic() >= self._expires_at
            ):
                token, expires_in = self._mint()
                self._credential = f"Bearer {token}"
                self._expires_at = (
                    self.clock.monotonic() + max(expires_in - EXPIRY_MARGIN, 0) if expires_in else None
                )
            return self._credential

    @abstractmethod
    def _mint(self) -> tuple[str, Optional[float]]:
        """Return (access token, lifetime in seconds or None)."""

    def _env(self, *names: Optional[str]) -> list[str]:
        missing = [n for n in names if n and not os.getenv(n)]
        if missing:
            raise CredentialError(f"Missing env vars: {', '.join(missing)}")
        return [os.getenv(n, "") for n in names if n]


class StaticBearerProvider(BaseAuthProvider):
    def _mint(self) -> tuple[str, Optional[float]]:
        if self.config.token:
            return self.config.token, None
        (token,) = self._env(self.config.token_env)
        return token, None


class _OAuth2Provider(BaseAuthProvider):
    grant_type = ""

    @abstractmethod
    def _form(self) -> dict[str, str]:
        pass

    def _mint(self) -> tuple[str, Optional[float]]:
        form = self._form()
        logger.info("Minting %s token at %s", self.grant_type, self.config.token_url)
        try:
            response = self.session.post(self.config.token_url, data=form, timeout=self.timeout)
        except requests.exceptions.RequestException as e:
            raise CredentialError(f"Token endpoint unreachable: {e}") from e
        if not 200 <= response.status_code < 300:
            raise CredentialError(f"Token endpoint rejected the request: HTTP {response.status_code}")
        try:
            payload = response.json()
        except ValueError as e:
            raise CredentialError("Token endpoint returned a non-JSON body") from e
        token = payload.get("access_token") if isinstance(payload, dict) else None
        if not token:
            raise CredentialError("Token endpoint response has no access_token")
        expires_in = payload.get("expires_in")
        return str(token), float(expires_in) if isinstance(expires_in, (int, float)) else None


class ClientCredentialsProvider(_OAuth2Provider):
    grant_type = "client_credentials"

    def _form(self) -> dict[str, str]:
        client_id, client_secret = self._env(self.config.client_id_env, self.config.client_secret_env)
        form = {"grant_type": self.grant_type, "client_id": client_id, "client_secret": client_secret}
        if self.config.scope:
            form["scope"] = self.config.scope
        return form


class RefreshTokenProvider(_OAuth2Provider):
    grant_type = "refresh_token"

    def _form(self) -> dict[str, str]:
        client_id, client_secret, refresh_token = self._env(
            self.config.client_id_env, self.config.client_secret_env, self.config.refresh_token_env
        )
        return {
            "grant_type": self.grant_type,
            "client_id": client_id,
            "client_secret": client_secret,
            "refresh_token": refresh_token,
        }


PROVIDERS = {
    "static_bearer": StaticBearerProvider,
    "oauth2_client_credentials": ClientCredentialsProvider,
    "oauth2_refresh_token": RefreshTokenProvider,
}


def create_auth_provider(config: AuthConfig, timeout: float = 30.0, clock=None) -> BaseAuthProvider:
    return PROVIDERS[config.kind](config, timeout=timeout, clock=clock)


def mint_token(provider: BaseAuthProvider) -> str:
    """Credential header value, e.g. 'Bearer abc'."""
    return provider.credential()
