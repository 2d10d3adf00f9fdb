"""
Spec-driven WSGI application.

Routing uses the same path matcher as the coverage engine, so the operation
the stub answers for is the one coverage will attribute the request to.
"""
import json
import logging
import os
import threading
from http import HTTPStatus
from typing import Optional

from webob import Request, Response

from src.coverage.matcher import match_path
from src.errors import AmbiguousMatch
from src.executor.log import CapturedBody, Interaction, dump_log
from src.openapi.model import OperationDescriptor
from src.stub.config import StubConfig
from src.utils import SystemClock, ensure_dir, normalize_media_type, rfc3339

logger = logging.getLogger(__name__)

JSON_BODY = b"{}"
XML_BODY = b"<response/>"
NO_BODY_STATUSES = (204, 304)


def _reason(code: int) -> str:
    try:
        return HTTPStatus(code).phrase
    except ValueError:
        return "Unknown"


def minimal_body(media_type: Optional[str]) -> bytes:
    base = normalize_media_type(media_type) or ""
    if base == "application/json" or base.endswith("+json"):
        return JSON_BODY
    if base.endswith("/xml") or base.endswith("+xml"):
        return XML_BODY
    return b""


def preferred_media_type(media_types) -> Optional[str]:
    if not media_types:
        return None
    ordered = sorted(media_types)
    return "application/json" if "application/json" in ordered else ordered[0]


def _plain(code: int, message: str, headers: Optional[list[tuple[str, str]]] = None) -> Response:
    body = json.dumps({"error": message}).encode("utf-8")
    headerlist = [("Content-Type", "application/json")] + (headers or [])
    return Response(status=f"{code} {_reason(code)}", headerlist=headerlist, body=body)


def _respond(code: int, media_type: Optional[str], body: Optional[bytes] = None) -> Response:
    if code in NO_BODY_STATUSES:
        return Response(status=f"{code} {_reason(code)}", headerlist=[], body=b"")
    headerlist = [("Content-Type", media_type)] if media_type else []
    content = minimal_body(media_type) if body is None else body
    return Response(status=f"{code} {_reason(code)}", headerlist=headerlist, body=content)


def default_response(operation: OperationDescriptor) -> tuple[int, Optional[str], bool]:
    """
    Lowest documented 2xx code; else the lowest documented code; else 200
    under the `default` entry. The flag reports the `default` fallback.
    """
    candidates = []
    for response in operation.documented_responses:
        if response.is_default:
            continue
        code = response.code if response.code is not None else response.status_class * 100
        candidates.append((code, response))
    successes = [c for c in candidates if 200 <= c[0] < 300]
    pool = successes or candidates
    if pool:
        code, response = min(pool, key=lambda c: c[0])
        return code, preferred_media_type(response.media_types), False
    fallback = operation.response("default")
    return 200, preferred_media_type(fallback.media_types) if fallback else None, True


def handle_request(config: StubConfig, request: Request) -> Response:
    spec = config.spec
    try:
        matched = match_path(spec, request.path_info or "/")
    except AmbiguousMatch as e:
        logger.warning("Ambiguous route %s: %s", request.path_info, e)
        matched = None
    if matched is None:
        return _plain(404, f"No documented path matches {request.path_info}")

    template, _ = matched
    operation = spec.operation(template, request.method)
    if operation is None:
        allowed = ", ".join(op.method for op in spec.operations_for(template))
        return _plain(405, f"{request.method} is not documented on {template}", [("Allow", allowed)])

    if config.auth_token is not None:
        if request.headers.get("Authorization") != f"Bearer {config.auth_token}":
            return _plain(401, "Missing or invalid bearer token", [("WWW-Authenticate", "Bearer")])

    query = {name: request.GET.getall(name) for name in request.GET.keys()}
    headers = dict(request.headers.items())
    for override in config.overrides:
        if override.path == template and override.method == operation.method and override.matches(query, headers):
            response = operation.response(str(override.status))
            media_type = override.media_type or (preferred_media_type(response.media_types) if response else None)
            body = override.body.encode("utf-8") if override.body is not None else None
            return _respond(override.status, media_type, body)

    code, media_type, from_default = default_response(operation)
    if from_default:
        logger.warning("%s %s documents only a default response; answering 200", operation.method, template)
    return _respond(code, media_type)


class StubApp:
    """WSGI callable serving one StubConfig, with an optional NDJSON access log."""

    def __init__(self, config: StubConfig, clock=None):
        self.config = config
        self.clock = clock or SystemClock()
        self._log_lock = threading.Lock()
        if config.access_log:
            ensure_dir(os.path.dirname(config.access_log))

    def __call__(self, environ, start_response):
        request = Request(environ)
        started = self.clock.monotonic()
        request_body = request.body
        response = handle_request(self.config, request)
        logger.info("%s %s -> %s", request.method, request.path_qs, response.status_code)
        if self.config.access_log:
            self._append(request, request_body, response, started)
        return response(environ, start_response)

    def _append(self, request: Request, request_body: bytes, response: Response, started: float):
        limit = self.config.body_limit
        interaction = Interaction(
            test_id="",
            timestamp=rfc3339(self.clock.now()),
            method=request.method,
            url=request.url,
            request_headers=dict(request.headers.items()),
            request_media_type=normalize_media_type(request.content_type),
            request_body=CapturedBody.capture(request_body, limit),
            status=response.status_code,
            response_headers=dict(response.headers.items()),
            response_media_type=normalize_media_type(response.headers.get("Content-Type")),
            response_body=CapturedBody.capture(response.body, limit),
            duration_ms=int((self.clock.monotonic() - started) * 1000),
        )
        with self._log_lock:
            with open(self.config.access_log, "ab") as f:
                f.write(dump_log([interaction]))
