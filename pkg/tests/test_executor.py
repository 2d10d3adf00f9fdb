import pytest

from src.errors import ConfigError, CredentialError, PreconditionFailed
from src.executor import (
    AuthConfig,
    FailureCategory,
    Outcome,
    TargetConfig,
    TestStats,
    classify_outcome,
    create_auth_provider,
    dump_log,
    execute_suite,
    format_console,
    mint_token,
    parse_log,
    summarize_results,
)
from src.suite import TestSuite, parse_suite, read_suite_file
from src.utils import http_date, rfc3339
from tests.conftest import fixture_path, free_port
from tests.test_suite import make_test, suite_bytes


def bound_item_suite() -> TestSuite:
    suite = read_suite_file(fixture_path("suites", "placeholder.json"))
    return TestSuite(suite.name, (suite.test("get-bound-item"),))


def target_for(handle, **settings) -> TargetConfig:
    return TargetConfig.from_dict({"base_url": handle.base_url(), **settings})


class TestExecuteSuite:
    def test_pass_and_assertion_failure(self, ping_spec, stub_server, fixed_clock):
        stub = stub_server(ping_spec)
        suite = read_suite_file(fixture_path("suites", "classification.json"))
        results, log = execute_suite(suite, target_for(stub), clock=fixed_clock)

        assert [r.outcome for r in results] == [Outcome.PASSED, Outcome.ASSERTION_FAILED]
        failed = results[1]
        assert failed.observed == 200
        assert failed.console_line() == "ASSERTION FAILED expects-404: expected status_equals 404, observed 200"
        assert [i.test_id for i in log] == ["expects-200", "expects-404"]
        assert log[0].url == stub.url + "/ping"
        assert log[0].timestamp == rfc3339(fixed_clock.now())
        assert log[0].response_header("Date") == http_date(fixed_clock.now())
        assert log[0].duration_ms == 0

    def test_unreachable_target_gives_runtime_errors(self, fixed_clock):
        suite = read_suite_file(fixture_path("suites", "classification.json"))
        target = TargetConfig.from_dict({"base_url": f"http://127.0.0.1:{free_port()}", "timeout": 5})
        results, log = execute_suite(suite, target, clock=fixed_clock)

        assert {r.outcome for r in results} == {Outcome.RUNTIME_ERROR}
        assert all(r.error_detail.startswith("connection error:") for r in results)
        assert log == ()

    def test_every_result_lands_in_exactly_one_category(self, ping_spec, stub_server, fixed_clock):
        stub = stub_server(ping_spec)
        suite = read_suite_file(fixture_path("suites", "classification.json"))
        reachable, _ = execute_suite(suite, target_for(stub), clock=fixed_clock)
        unreachable, _ = execute_suite(
            suite, TargetConfig.from_dict({"base_url": f"http://127.0.0.1:{free_port()}"}), clock=fixed_clock
        )
        results = reachable + unreachable

        stats = summarize_results(results)
        assert stats == TestStats.from_counts(successful=1, assertion_errors=1, other_runtime_errors=2)
        assert stats.generated == stats.successful + stats.failures.assertion_errors + stats.failures.other_runtime_errors
        assert [classify_outcome(r) for r in results] == [
            FailureCategory.SUCCESS,
            FailureCategory.ASSERTION_ERROR,
            FailureCategory.OTHER_RUNTIME_ERROR,
            FailureCategory.OTHER_RUNTIME_ERROR,
        ]
        assert format_console(results).splitlines()[-1] == "4 tests, 1 passed, 1 assertion failures, 2 runtime errors"

    def test_placeholders_block_execution(self, toy_spec, stub_server):
        stub = stub_server(toy_spec)
        suite = read_suite_file(fixture_path("suites", "placeholder.json"))
        with pytest.raises(PreconditionFailed) as excinfo:
            execute_suite(suite, target_for(stub))
        assert len(excinfo.value.issues) == 1

    def test_unbound_variable_is_a_runtime_error(self, toy_spec, stub_server, fixed_clock):
        stub = stub_server(toy_spec)
        suite = bound_item_suite()
        results, log = execute_suite(suite, target_for(stub), clock=fixed_clock)
        assert results[0].outcome == Outcome.RUNTIME_ERROR
        assert results[0].error_detail == "unknown variable itemId"
        assert log == ()

    def test_bound_variable_is_substituted(self, toy_spec, stub_server, fixed_clock):
        stub = stub_server(toy_spec)
        suite = bound_item_suite()
        results, log = execute_suite(suite, target_for(stub, variables={"itemId": 7}), clock=fixed_clock)
        assert results[0].outcome == Outcome.PASSED
        assert log[0].url.endswith("/items/7")

    def test_body_and_json_path_assertions(self, toy_spec, stub_server, fixed_clock):
        overrides = [
            {
                "path": "/items",
                "method": "GET",
                "status": 400,
                "when": {"query": {"status": "bogus"}},
                "body": '{"message": "unknown status"}',
            }
        ]
        stub = stub_server(toy_spec, overrides)
        test = make_test("bogus", path="/items", query={"status": "bogus"})
        test["assertions"] = [
            {"kind": "status_equals", "expected": 400},
            {"kind": "header_present", "expected": "Content-Type"},
            {"kind": "body_contains", "expected": "unknown"},
            {"kind": "json_path_equals", "expected": {"path": "$.message", "value": "unknown status"}},
        ]
        create = make_test(
            "create", method="POST", path="/items", body={"name": "lamp"}, bodyMediaType="application/json"
        )
        create["assertions"] = [{"kind": "json_path_equals", "expected": {"path": "$.id", "value": 1}}]
        results, log = execute_suite(parse_suite(suite_bytes(test, create)), target_for(stub), clock=fixed_clock)

        assert results[0].outcome == Outcome.PASSED
        assert results[1].outcome == Outcome.ASSERTION_FAILED
        assert results[1].observed == "<missing>"
        assert log[0].url.endswith("/items?status=bogus")
        assert log[1].request_media_type == "application/json"
        assert log[1].request_body.text == '{"name":"lamp"}'

    def test_log_survives_ndjson(self, ping_spec, stub_server, fixed_clock):
        stub = stub_server(ping_spec)
        suite = read_suite_file(fixture_path("suites", "classification.json"))
        _, log = execute_suite(suite, target_for(stub), clock=fixed_clock)
        content = dump_log(log)
        assert content.count(b"\n") == 2
        assert b'"testId":"expects-200"' in content
        assert parse_log(content) == log

    def test_cookies_do_not_leak_between_tests(self, recording_server, fixed_clock):
        app, url = recording_server((200, {}, {"Set-Cookie": "sid=abc; Path=/"}))
        suite = parse_suite(suite_bytes(make_test("first"), make_test("second")))
        results, log = execute_suite(suite, TargetConfig.from_dict({"base_url": url}), clock=fixed_clock)

        assert [r.outcome for r in results] == [Outcome.PASSED, Outcome.PASSED]
        assert log[0].response_header("Set-Cookie") == "sid=abc; Path=/"
        assert "Cookie" not in app.requests[1]["headers"]
        assert not any(key.lower() == "cookie" for key in log[1].request_headers)

    def test_declared_cookie_header_is_sent(self, recording_server, fixed_clock):
        app, url = recording_server((200, {}))
        suite = parse_suite(suite_bytes(make_test(headers={"Cookie": "theme=dark"})))
        _, log = execute_suite(suite, TargetConfig.from_dict({"base_url": url}), clock=fixed_clock)
        assert app.requests[0]["headers"]["Cookie"] == "theme=dark"
        assert log[0].request_headers["Cookie"] == "theme=dark"


class TestAuth:
    def test_static_bearer_is_sent_and_redacted(self, ping_spec, stub_server, fixed_clock):
        stub = stub_server(ping_spec, auth_token="secret")
        suite = parse_suite(suite_bytes(make_test("authed", authenticate=True), make_test("anonymous")))
        target = target_for(stub, auth={"kind": "static_bearer", "token": "secret"})
        results, log = execute_suite(suite, target, clock=fixed_clock)

        assert results[0].outcome == Outcome.PASSED
        assert results[1].outcome == Outcome.ASSERTION_FAILED
        assert results[1].observed == 401
        assert log[0].header("Authorization") == "Bearer ***"

    def test_authenticate_without_auth_config(self, ping_spec, stub_server):
        stub = stub_server(ping_spec)
        suite = parse_suite(suite_bytes(make_test("authed", authenticate=True)))
        results, log = execute_suite(suite, target_for(stub))
        assert results[0].outcome == Outcome.RUNTIME_ERROR
        assert results[0].error_detail.startswith("credential error:")
        assert log == ()

    def test_static_bearer_from_env(self, monkeypatch):
        monkeypatch.setenv("RESTAMP_TEST_TOKEN", "from-env")
        provider = create_auth_provider(AuthConfig.from_dict({"kind": "static_bearer", "token_env": "RESTAMP_TEST_TOKEN"}))
        assert mint_token(provider) == "Bearer from-env"

    def test_client_credentials(self, recording_server, monkeypatch, fixed_clock):
        app, url = recording_server((200, {"access_token": "t1", "expires_in": 3600}))
        monkeypatch.setenv("RESTAMP_CLIENT_ID", "client")
        monkeypatch.setenv("RESTAMP_CLIENT_SECRET", "secret")
        config = AuthConfig.from_dict(
            {
                "kind": "oauth2_client_credentials",
                "token_url": url + "/token",
                "client_id_env": "RESTAMP_CLIENT_ID",
                "client_secret_env": "RESTAMP_CLIENT_SECRET",
                "scope": "read",
            }
        )
        provider = create_auth_provider(config, clock=fixed_clock)

        assert mint_token(provider) == "Bearer t1"
        assert mint_token(provider) == "Bearer t1"
        assert len(app.requests) == 1
        assert app.requests[0]["form"] == {
            "grant_type": "client_credentials",
            "client_id": "client",
            "client_secret": "secret",
            "scope": "read",
        }

    def test_refresh_token(self, recording_server, monkeypatch):
        app, url = recording_server((200, {"access_token": "t1", "expires_in": 3600}))
        monkeypatch.setenv("RESTAMP_CLIENT_ID", "client")
        monkeypatch.setenv("RESTAMP_CLIENT_SECRET", "secret")
        monkeypatch.setenv("RESTAMP_REFRESH", "r1")
        config = AuthConfig.from_dict(
            {
                "kind": "oauth2_refresh_token",
                "token_url": url + "/token",
                "client_id_env": "RESTAMP_CLIENT_ID",
                "client_secret_env": "RESTAMP_CLIENT_SECRET",
                "refresh_token_env": "RESTAMP_REFRESH",
            }
        )
        assert mint_token(create_auth_provider(config)) == "Bearer t1"
        assert app.requests[0]["form"]["grant_type"] == "refresh_token"
        assert app.requests[0]["form"]["refresh_token"] == "r1"

    def test_missing_secret(self, monkeypatch):
        monkeypatch.setenv("RESTAMP_CLIENT_ID", "client")
        monkeypatch.delenv("RESTAMP_CLIENT_SECRET", raising=False)
        config = AuthConfig.from_dict(
            {
                "kind": "oauth2_client_credentials",
                "token_url": "http://127.0.0.1:1/token",
                "client_id_env": "RESTAMP_CLIENT_ID",
                "client_secret_env": "RESTAMP_CLIENT_SECRET",
            }
        )
        with pytest.raises(CredentialError, match="RESTAMP_CLIENT_SECRET"):
            mint_token(create_auth_provider(config))

    def test_rejected_token_request(self, recording_server, monkeypatch):
        _, url = recording_server((401, {"error": "invalid_client"}))
        monkeypatch.setenv("RESTAMP_CLIENT_ID", "client")
        monkeypatch.setenv("RESTAMP_CLIENT_SECRET", "secret")
        config = AuthConfig.from_dict(
            {
                "kind": "oauth2_client_credentials",
                "token_url": url + "/token",
                "client_id_env": "RESTAMP_CLIENT_ID",
                "client_secret_env": "RESTAMP_CLIENT_SECRET",
            }
        )
        with pytest.raises(CredentialError, match="HTTP 401"):
            mint_token(create_auth_provider(config))


class TestTargetConfig:
    @pytest.mark.parametrize(
        "data",
        [
            {"base_url": "localhost:8080"},
            {"base_url": "http://localhost", "timeout": 0},
            {"base_url": "http://localhost", "auth": {"kind": "basic"}},
            {"base_url": "http://localhost", "auth": {"kind": "static_bearer"}},
            {"base_url": "http://localhost", "auth": {"kind": "oauth2_client_credentials", "token_url": "http://x"}},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            TargetConfig.from_dict(data)

    def test_with_base_url(self):
        target = TargetConfig.from_dict({"base_url": "http://localhost/", "variables": {"id": 3}})
        assert target.base_url == "http://localhost"
        assert target.variables == {"id": "3"}
        assert target.with_base_url("http://other/api/").base_url == "http://other/api"
