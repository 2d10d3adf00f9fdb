"""
Execution log: one Interaction per completed HTTP exchange, stored as NDJSON.

Field names on disk are lowerCamelCase. Bodies are kept as UTF-8 text when
they decode, otherwise base64 (flagged by the *BodyEncoding field), truncated
to the configured limit, with a digest of the full body alongside.
"""
import base64
import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from src.errors import LogFormatError
from src.utils import ensure_dir, sha256_digest

TEXT_ENCODING = "utf-8"
BASE64_ENCODING = "base64"


@dataclass(frozen=True)
class CapturedBody:
    text: Optional[str] = None
    encoding: str = TEXT_ENCODING
    digest: Optional[str] = None
    size: int = 0

    @classmethod
    def capture(cls, content: Optional[bytes], limit: int) -> "CapturedBody":
        if not content:
            return cls()
        kept = content[:limit]
        try:
            text = kept.decode("utf-8")
            encoding = TEXT_ENCODING
        except UnicodeDecodeError:
            text = base64.b64encode(kept).decode("ascii")
            encoding = BASE64_ENCODING
        return cls(
            text=text,
            encoding=encoding,
            digest=sha256_digest(content),
            size=len(content),
        )

    @property
    def truncated(self) -> bool:
        return self.size > len(self.raw())

    @property
    def present(self) -> bool:
        return self.size > 0

    def raw(self) -> bytes:
        """The stored (possibly truncated) bytes."""
        if self.text is None:
            return b""
        if self.encoding == BASE64_ENCODING:
            return base64.b64decode(self.text)
        return self.text.encode("utf-8")


@dataclass(frozen=True)
class Interaction:
    test_id: str
    timestamp: str
    method: str
    url: str
    request_headers: dict[str, str] = field(default_factory=dict)
    request_media_type: Optional[str] = None
    request_body: CapturedBody = field(default_factory=CapturedBody)
    status: int = 0
    response_headers: dict[str, str] = field(default_factory=dict)
    response_media_type: Optional[str] = None
    response_body: CapturedBody = field(default_factory=CapturedBody)
    duration_ms: int = 0

    def header(self, name: str) -> Optional[str]:
        return _lookup(self.request_headers, name)

    def response_header(self, name: str) -> Optional[str]:
        return _lookup(self.response_headers, name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "testId": self.test_id,
            "timestamp": self.timestamp,
            "method": self.method,
            "url": self.url,
            "requestHeaders": self.request_headers,
            "requestMediaType": self.request_media_type,
            "requestBody": self.request_body.text,
            "requestBodyEncoding": self.request_body.encoding,
            "requestBodySize": self.request_body.size,
            "requestBodyDigest": self.request_body.digest,
            "status": self.status,
            "responseHeaders": self.response_headers,
            "responseMediaType": self.response_media_type,
            "responseBody": self.response_body.text,
            "responseBodyEncoding": self.response_body.encoding,
            "responseBodySize": self.response_body.size,
            "responseBodyDigest": self.response_body.digest,
            "durationMs": self.duration_ms,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Interaction":
        try:
            return cls(
                test_id=str(data.get("testId", "")),
                timestamp=str(data.get("timestamp", "")),
                method=str(data["method"]).upper(),
                url=str(data["url"]),
                request_headers=dict(data.get("requestHeaders") or {}),
                request_media_type=data.get("requestMediaType"),
                request_body=_body_from(data, "request"),
                status=int(data["status"]),
                response_headers=dict(data.get("responseHeaders") or {}),
                response_media_type=data.get("responseMediaType"),
                response_body=_body_from(data, "response"),
                duration_ms=int(data.get("durationMs", 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise LogFormatError(f"Invalid interaction record: {e}") from e


ExecutionLog = tuple[Interaction, ...]


def _lookup(headers: dict[str, str], name: str) -> Optional[str]:
    name = name.lower()
    for key, value in headers.items():
        if key.lower() == name:
            return value
    return None


def _body_from(data: dict[str, Any], prefix: str) -> CapturedBody:
    text = data.get(f"{prefix}Body")
    size = data.get(f"{prefix}BodySize")
    if size is None:
        size = len(text.encode("utf-8")) if text else 0
    return CapturedBody(
        text=text,
        encoding=data.get(f"{prefix}BodyEncoding") or TEXT_ENCODING,
        digest=data.get(f"{prefix}BodyDigest"),
        size=int(size),
    )


def dump_log(log: Iterable[Interaction]) -> bytes:
    lines = [json.dumps(i.to_dict(), ensure_ascii=False, separators=(",", ":")) for i in log]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def parse_log(content: bytes) -> ExecutionLog:
    interactions = []
    for number, line in enumerate(content.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            interactions.append(Interaction.from_dict(json.loads(line)))
        except json.JSONDecodeError as e:
            raise LogFormatError(f"Line {number} is not JSON: {e}") from e
    return tuple(interactions)


def write_log_file(log: Iterable[Interaction], path: str):
    ensure_dir(os.path.dirname(path))
    with open(path, "wb") as f:
        f.write(dump_log(log))


def read_log_file(path: str) -> ExecutionLog:
    with open(path, "rb") as f:
        return parse_log(f.read())
