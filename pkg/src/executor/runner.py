import http.cookiejar
import json
import logging
from dataclasses import dataclass
from typing import Any, Optional

import requests

from src.config import section
from src.errors import CredentialError, PreconditionFailed
from src.executor.auth import BaseAuthProvider, create_auth_provider, mint_token
from src.executor.log import CapturedBody, ExecutionLog, Interaction
from src.executor.results import TestResult
from src.executor.target import TargetConfig
from src.suite.codec import request_media_type
from src.suite.linter import validate_suite
from src.suite.model import AssertionKind, IssueKind, TestCase, TestSuite, evaluate_json_path, is_missing
from src.suite.placeholders import substitute_variables
from src.utils import SystemClock, http_date, normalize_media_type, rfc3339

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreparedStep:
    method: str
    url: str
    headers: dict[str, str]
    body: Optional[bytes]
    media_type: Optional[str]


class _Observed:
    """What the assertions look at: the full (untruncated) response."""

    def __init__(self, response: requests.Response):
        self.status = response.status_code
        self.headers = response.headers
        self.content = response.content
        self._json: Any = None
        self._json_error: Optional[str] = None
        self._parsed = False

    @property
    def text(self) -> str:
        return self.content.decode("utf-8", errors="replace")

    def json(self) -> tuple[Any, Optional[str]]:
        if not self._parsed:
            self._parsed = True
            try:
                self._json = json.loads(self.content.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                self._json_error = "response body is not JSON"
        return self._json, self._json_error


def _same_value(observed: Any, expected: Any) -> bool:
    if isinstance(observed, bool) or isinstance(expected, bool):
        return type(observed) is type(expected) and observed == expected
    return observed == expected


def check_assertions(test: TestCase, observed: _Observed) -> TestResult:
    """First failing assertion decides the result."""
    for assertion in test.assertions:
        expected = assertion.expected
        if assertion.kind == AssertionKind.STATUS_EQUALS:
            ok, seen = observed.status == expected, observed.status
        elif assertion.kind == AssertionKind.STATUS_CLASS_EQUALS:
            seen = observed.status // 100
            ok = seen == expected
        elif assertion.kind == AssertionKind.HEADER_PRESENT:
            ok = expected in observed.headers
            seen = sorted(observed.headers.keys())
        elif assertion.kind == AssertionKind.BODY_CONTAINS:
            ok = expected in observed.text
            seen = observed.text[:200]
        else:
            document, error = observed.json()
            if error:
                ok, seen = False, error
            else:
                value = evaluate_json_path(document, expected["path"])
                ok = not is_missing(value) and _same_value(value, expected["value"])
                seen = "<missing>" if is_missing(value) else value
        if not ok:
            return TestResult.assertion_failed(test.id, assertion, seen, observed.status)
    return TestResult.passed(test.id, observed.status)


class SuiteRunner:
    """
    Runs one suite against one target, sequentially, without retries.

    Network failures and unresolvable steps become runtime_error results; only
    a suite that still carries <PLACEHOLDER> tokens is refused up front.
    """

    def __init__(self, target: TargetConfig, clock=None, session: Optional[requests.Session] = None):
        self.target = target
        self.clock = clock or SystemClock()
        self.session = session or requests.Session()
        # Tests never share state through the jar.
        self.session.cookies.set_policy(http.cookiejar.DefaultCookiePolicy(allowed_domains=[]))
        self.session.headers["User-Agent"] = section("executor").get("user_agent", "restamp")
        self.auth: Optional[BaseAuthProvider] = (
            create_auth_provider(target.auth, timeout=target.timeout, clock=self.clock) if target.auth else None
        )

    # -- request preparation ---------------------------------------------
    def _prepare(self, test: TestCase) -> tuple[PreparedStep, requests.PreparedRequest]:
        step = test.step
        variables = self.target.variables
        path = substitute_variables(step.path, variables)
        if not path.startswith("/"):
            path = "/" + path
        query = [(substitute_variables(k, variables), substitute_variables(v, variables)) for k, v in step.query]
        headers = {substitute_variables(k, variables): substitute_variables(v, variables) for k, v in step.headers}

        body = None
        media_type = request_media_type(step)
        if step.has_body:
            body = substitute_variables(step.body_text(), variables).encode("utf-8")
            if media_type and not any(k.lower() == "content-type" for k in headers):
                headers["Content-Type"] = step.body_media_type

        if step.authenticate:
            if self.auth is None:
                raise CredentialError("step requests authentication but the target has no auth configured")
            headers[self.auth.header_name] = mint_token(self.auth)

        prepared = self.session.prepare_request(
            requests.Request(step.method, self.target.base_url + path, params=query, headers=headers, data=body)
        )
        return PreparedStep(
            method=prepared.method,
            url=prepared.url,
            headers=dict(prepared.headers),
            body=body,
            media_type=media_type,
        ), prepared

    def _logged_request_headers(self, headers: dict[str, str]) -> dict[str, str]:
        if self.auth is None:
            return headers
        redacted = {}
        for key, value in headers.items():
            if key.lower() == self.auth.header_name.lower():
                scheme = value.split(" ", 1)[0] if " " in value else ""
                value = f"{scheme} ***".strip()
            redacted[key] = value
        return redacted

    def _logged_response_headers(self, response: requests.Response) -> dict[str, str]:
        headers = dict(response.headers)
        if self.clock.fixed:
            for key in headers:
                if key.lower() == "date":
                    headers[key] = http_date(self.clock.now())
        return headers

    # -- execution ---------------------------------------------------------
    def run_test(self, test: TestCase) -> tuple[TestResult, Optional[Interaction]]:
        try:
            step, prepared = self._prepare(test)
        except KeyError as e:
            return TestResult.runtime_error(test.id, f"unknown variable {e.args[0]}"), None
        except CredentialError as e:
            return TestResult.runtime_error(test.id, f"credential error: {e}"), None
        except (requests.exceptions.RequestException, ValueError) as e:
            return TestResult.runtime_error(test.id, f"invalid request: {e}"), None

        timestamp = rfc3339(self.clock.now())
        started = self.clock.monotonic()
        try:
            response = self.session.send(prepared, timeout=self.target.timeout, allow_redirects=False)
        except requests.exceptions.Timeout:
            return TestResult.runtime_error(test.id, f"timeout after {self.target.timeout:g}s"), None
        except requests.exceptions.ConnectionError as e:
            return TestResult.runtime_error(test.id, f"connection error: {e}"), None
        except requests.exceptions.RequestException as e:
            return TestResult.runtime_error(test.id, f"request error: {e}"), None
        elapsed = self.clock.monotonic() - started

        interaction = Interaction(
            test_id=test.id,
            timestamp=timestamp,
            method=step.method,
            url=step.url,
            request_headers=self._logged_request_headers(step.headers),
            request_media_type=step.media_type,
            request_body=CapturedBody.capture(step.body, self.target.body_limit),
            status=response.status_code,
            response_headers=self._logged_response_headers(response),
            response_media_type=normalize_media_type(response.headers.get("Content-Type")),
            response_body=CapturedBody.capture(response.content, self.target.body_limit),
            duration_ms=int(round(elapsed * 1000)),
        )
        return check_assertions(test, _Observed(response)), interaction

    def run(self, suite: TestSuite) -> tuple[list[TestResult], ExecutionLog]:
        issues = [
            i for i in validate_suite(suite, variables=self.target.variables)
            if i.kind == IssueKind.UNRESOLVED_PLACEHOLDER
        ]
        if issues:
            raise PreconditionFailed(f"{len(issues)} unresolved placeholder(s) remain in the suite", issues)

        results: list[TestResult] = []
        log: list[Interaction] = []
        total = len(suite.tests)
        for idx, test in enumerate(suite.tests, start=1):
            logger.info("[%d/%d] %s %s %s", idx, total, test.id, test.step.method, test.step.path)
            result, interaction = self.run_test(test)
            results.append(result)
            if interaction is not None:
                log.append(interaction)
            logger.info("[%d/%d] %s", idx, total, result.console_line())
        return results, tuple(log)


def execute_suite(
    suite: TestSuite, target: TargetConfig, clock=None, session: Optional[requests.Session] = None
) -> tuple[list[TestResult], ExecutionLog]:
    return SuiteRunner(target, clock=clock, session=session).run(suite)
