import json
import os
import socket
import threading

import pytest
from webob import Request, Response
from webtest.http import StopableWSGIServer

from src.executor.log import CapturedBody, Interaction
from src.openapi import load_spec_file
from src.stub import StubConfig, serve
from src.utils import FixedClock

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def fixture_path(*parts: str) -> str:
    return os.path.join(FIXTURES, *parts)


def free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def make_interaction(
    method: str,
    url: str,
    status: int = 200,
    response_type="application/json",
    request_type=None,
    body: bytes = b"",
    headers=None,
    test_id: str = "t",
) -> Interaction:
    return Interaction(
        test_id=test_id,
        timestamp="2025-01-01T00:00:00.000Z",
        method=method,
        url=url,
        request_headers=dict(headers or {}),
        request_media_type=request_type,
        request_body=CapturedBody.capture(body, 65536),
        status=status,
        response_headers={"Content-Type": response_type} if response_type else {},
        response_media_type=response_type,
    )


# ----------------------------------------------------------
# Specs
# ----------------------------------------------------------
@pytest.fixture(scope="session")
def toy_spec():
    return load_spec_file(fixture_path("toy_v3.yaml"))


@pytest.fixture(scope="session")
def toy_spec_v2():
    return load_spec_file(fixture_path("toy_v2.json"))


@pytest.fixture(scope="session")
def ping_spec():
    return load_spec_file(fixture_path("ping.yaml"))


@pytest.fixture(scope="session")
def petstore_spec():
    return load_spec_file(fixture_path("petstore_v2.json"))


@pytest.fixture(scope="session")
def booker_spec():
    return load_spec_file(fixture_path("restful_booker.yaml"))


@pytest.fixture
def fixed_clock():
    return FixedClock()


# ----------------------------------------------------------
# Servers
# ----------------------------------------------------------
@pytest.fixture
def stub_server():
    """Factory: start a stub for a spec on an ephemeral port; all are shut down after the test."""
    handles = []

    def start(spec, overrides=None, **settings):
        config = StubConfig.from_dict(spec, {"port": 0, "overrides": overrides or [], **settings})
        handle = serve(config)
        handles.append(handle)
        return handle

    yield start
    for handle in handles:
        handle.shutdown()


class RecordingApp:
    """WSGI app that records every request body and answers with canned JSON."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []
        self._lock = threading.Lock()

    def __call__(self, environ, start_response):
        request = Request(environ)
        with self._lock:
            self.requests.append(
                {
                    "path": request.path_info,
                    "headers": dict(request.headers.items()),
                    "body": request.body,
                    "form": dict(request.POST.items()) if request.content_type.startswith("application/x-www") else {},
                }
            )
            status, payload, *extra = self.replies.pop(0) if len(self.replies) > 1 else self.replies[0]
        response = Response(status=status, content_type="application/json", charset=None)
        response.body = json.dumps(payload).encode("utf-8")
        for name, value in (extra[0] if extra else {}).items():
            response.headers[name] = value
        return response(environ, start_response)


@pytest.fixture
def recording_server():
    """Factory: serve a RecordingApp; returns (app, base url)."""
    servers = []

    def start(*replies):
        app = RecordingApp(replies)
        server = StopableWSGIServer.create(app, host="127.0.0.1", port=0)
        servers.append(server)
        return app, f"http://127.0.0.1:{server.effective_port}"

    yield start
    for server in servers:
        server.shutdown()


def chat_reply(content="", tool_calls=None, prompt_tokens=11, completion_tokens=7):
    message = {"role": "assistant", "content": content}
    if tool_calls:
        message["tool_calls"] = tool_calls
    return (
        200,
        {
            "id": "chatcmpl-1",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": message, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
        },
    )
