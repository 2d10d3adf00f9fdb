import json

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st
from webob import Request
from webtest import TestApp

from src.coverage import match_request
from src.errors import BindError, ConfigError
from src.executor import read_log_file
from src.openapi import load_spec, load_spec_file
from src.stub import StubApp, StubConfig, default_response, handle_request, minimal_body, serve
from src.stub.config import documents_status
from tests.conftest import fixture_path, free_port


def app_for(spec, **settings) -> TestApp:
    return TestApp(StubApp(StubConfig.from_dict(spec, {"port": 0, **settings})))


class TestRouting:
    def test_lowest_success_status(self, toy_spec):
        app = app_for(toy_spec)
        response = app.get("/items")
        assert response.status_int == 200
        assert response.content_type == "application/json"
        assert response.body == b"{}"
        assert app.post("/items", status=201).status_int == 201

    def test_no_content(self, toy_spec):
        response = app_for(toy_spec).delete("/items/3", status=204)
        assert response.body == b""
        assert "Content-Type" not in response.headers

    def test_unknown_path(self, toy_spec):
        response = app_for(toy_spec).get("/nowhere", status=404)
        assert "No documented path" in response.json["error"]

    def test_undocumented_method(self, toy_spec):
        response = app_for(toy_spec).put("/items", status=405)
        assert response.headers["Allow"] == "GET, POST"

    def test_bearer_token(self, toy_spec):
        app = app_for(toy_spec, auth_token="secret")
        assert app.get("/ping", status=401).headers["WWW-Authenticate"] == "Bearer"
        app.get("/ping", headers={"Authorization": "Bearer wrong"}, status=401)
        app.get("/ping", headers={"Authorization": "Bearer secret"}, status=200)
        app.get("/nowhere", status=404)

    def test_overrides(self, toy_spec):
        config = StubConfig.from_file(toy_spec, fixture_path("toy_overrides.json"))
        app = TestApp(StubApp(config))
        bogus = app.get("/items", params={"status": "bogus"}, status=400)
        assert bogus.json == {"message": "unknown status"}
        assert app.get("/items", params={"status": "sold"}).status_int == 200
        assert app.post("/items", headers={"X-Force-Status": "400"}, status=400).body == b"{}"
        app.get("/items/1", headers={"x-force-status": "404"}, status=404)
        app.delete("/items/1", headers={"X-Force-Status": "404"}, status=404)

    def test_default_only_operation(self, petstore_spec):
        app = app_for(petstore_spec)
        response = app.post("/v2/user", status=200)
        assert response.body == b"{}"

    def test_xml_only_response(self):
        assert minimal_body("application/xml") == b"<response/>"
        assert minimal_body("application/problem+json") == b"{}"
        assert minimal_body("text/plain") == b""

    def test_default_response_choice(self, toy_spec, petstore_spec):
        assert default_response(toy_spec.operation("/items", "POST")) == (201, "application/json", False)
        assert default_response(toy_spec.operation("/items/{itemId}", "DELETE")) == (204, None, False)
        assert default_response(petstore_spec.operation("/user", "POST"))[::2] == (200, True)


class TestConfig:
    def test_undocumented_status_needs_the_flag(self, ping_spec):
        with pytest.raises(ConfigError, match="503"):
            StubConfig.from_file(ping_spec, fixture_path("bad_overrides.json"))
        flagged = {"overrides": [{"path": "/ping", "status": 503, "undocumented": True}]}
        app = TestApp(StubApp(StubConfig.from_dict(ping_spec, flagged)))
        app.get("/ping", status=503)

    def test_undocumented_operation(self, ping_spec):
        with pytest.raises(ConfigError):
            StubConfig.from_dict(ping_spec, {"overrides": [{"path": "/ping", "method": "DELETE", "status": 200}]})

    @pytest.mark.parametrize(
        "data",
        [
            {"port": 70000},
            {"port": "http"},
            {"overrides": {"path": "/ping"}},
            {"overrides": [{"path": "/ping", "status": "teapot"}]},
            {"overrides": [{"status": 200}]},
            {"overrides": [{"path": "/ping", "status": 200, "when": {"query": ["a"]}}]},
        ],
    )
    def test_invalid(self, ping_spec, data):
        with pytest.raises(ConfigError):
            StubConfig.from_dict(ping_spec, data)

    def test_range_entries_document_their_class(self):
        spec = load_spec(
            b'{"openapi": "3.0.0", "info": {"title": "t", "version": "1"}, "paths": {"/a": {"get": {"responses": '
            b'{"200": {"description": "ok"}, "4XX": {"description": "client"}}}}}}',
            "json",
        )
        operation = spec.operation("/a", "GET")
        assert documents_status(operation, 418)
        assert not documents_status(operation, 503)


class TestServe:
    def test_serves_over_http(self, toy_spec, stub_server):
        stub = stub_server(toy_spec)
        assert stub.port > 0
        response = requests.get(stub.base_url() + "/items/5", timeout=5)
        assert response.status_code == 200
        assert response.json() == {}

    def test_base_path_is_served(self, booker_spec, stub_server):
        stub = stub_server(booker_spec)
        assert stub.base_url() == stub.url + "/api"
        assert requests.get(stub.base_url() + "/ping", timeout=5).status_code == 201

    def test_access_log(self, ping_spec, stub_server, tmp_path):
        log_file = str(tmp_path / "logs" / "access.ndjson")
        stub = stub_server(ping_spec, access_log=log_file)
        requests.get(stub.url + "/ping", timeout=5)
        requests.get(stub.url + "/nowhere", timeout=5)
        log = read_log_file(log_file)
        assert [(i.method, i.status) for i in log] == [("GET", 200), ("GET", 404)]
        assert log[0].response_media_type == "application/json"

    def test_port_in_use(self, ping_spec, stub_server):
        first = stub_server(ping_spec)
        with pytest.raises(BindError):
            serve(StubConfig.from_dict(ping_spec, {"port": first.port}))

    def test_shutdown_is_idempotent(self, ping_spec):
        with serve(StubConfig.from_dict(ping_spec, {"port": free_port()})) as stub:
            assert requests.get(stub.url + "/ping", timeout=5).status_code == 200
        stub.shutdown()


# ----------------------------------------------------------
# The stub answers for the operation coverage attributes a request to
# ----------------------------------------------------------
TOY_PATHS = st.sampled_from(["/ping", "/items", "/items/1", "/items/abc", "/items/1/x", "/nowhere", "/"])
TOY_METHODS = st.sampled_from(["GET", "POST", "PUT", "PATCH", "DELETE"])


@settings(max_examples=100, deadline=None)
@given(path=TOY_PATHS, method=TOY_METHODS)
def test_stub_routing_agrees_with_matcher(path, method):
    spec = load_spec_file(fixture_path("toy_v3.yaml"))
    config = StubConfig(spec, port=0)
    response = handle_request(config, Request.blank(path, method=method))
    matched = match_request(spec, method, path)
    if matched is None:
        assert response.status_code == 404
    elif matched.operation is None:
        assert response.status_code == 405
    else:
        codes = {r.code for r in matched.operation.documented_responses}
        assert response.status_code in codes
        if response.body:
            json.loads(response.body)
