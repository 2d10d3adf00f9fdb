"""
Suite document codec.

A suite is a JSON object:

    {"suite": "...", "tests": [{"id", "name",
      "request": {"method", "path", "query", "headers", "body", "bodyMediaType", "authenticate"},
      "assertions": [{"kind", "expected"}]}]}

Unknown keys are rejected at every level. Rendering uses a fixed key order so
that the same suite always produces the same bytes.
"""
import json
import re
from typing import Any, Iterable, Optional

from src.errors import DuplicateId, SchemaViolation, SuiteSyntaxError
from src.suite.model import (
    STEP_METHODS,
    Assertion,
    AssertionKind,
    HttpStep,
    TestCase,
    TestSuite,
    parse_json_path,
)
from src.utils import canonical_json, normalize_media_type

SUITE_KEYS = {"suite", "tests"}
TEST_KEYS = {"id", "name", "request", "assertions"}
REQUEST_KEYS = {"method", "path", "query", "headers", "body", "bodyMediaType", "authenticate"}
ASSERTION_KEYS = {"kind", "expected"}
JSON_PATH_KEYS = {"path", "value"}

FENCED_JSON = re.compile(r"```(?:json)?[ \t]*\r?\n(.*?)```", re.DOTALL)


# ----------------------------------------------------------
# Parsing
# ----------------------------------------------------------
def _require_object(value: Any, where: str, allowed: set[str], required: Iterable[str]) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise SchemaViolation(f"{where} must be an object")
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise SchemaViolation(f"{where} has unknown field(s): {', '.join(unknown)}")
    missing = [key for key in required if key not in value]
    if missing:
        raise SchemaViolation(f"{where} is missing field(s): {', '.join(missing)}")
    return value


def _require_text(value: Any, where: str, allow_empty: bool = False) -> str:
    if not isinstance(value, str):
        raise SchemaViolation(f"{where} must be a string")
    if not allow_empty and not value.strip():
        raise SchemaViolation(f"{where} must not be empty")
    return value


def _query_value(value: Any, where: str) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (str, int, float)):
        return str(value)
    raise SchemaViolation(f"{where} must be a string, number or boolean")


def _parse_assertion(raw: Any, where: str) -> Assertion:
    data = _require_object(raw, where, ASSERTION_KEYS, ("kind", "expected"))
    try:
        kind = AssertionKind(data["kind"])
    except ValueError:
        raise SchemaViolation(f"{where}.kind {data['kind']!r} is not a known assertion kind")
    expected = data["expected"]

    if kind == AssertionKind.STATUS_EQUALS:
        if isinstance(expected, bool) or not isinstance(expected, int) or not 100 <= expected <= 599:
            raise SchemaViolation(f"{where}.expected must be an integer status 100-599")
    elif kind == AssertionKind.STATUS_CLASS_EQUALS:
        if isinstance(expected, str) and re.fullmatch(r"[1-5][xX]{2}", expected):
            expected = int(expected[0])
        if isinstance(expected, bool) or not isinstance(expected, int) or not 1 <= expected <= 5:
            raise SchemaViolation(f"{where}.expected must be a status class 1-5 (or '2xx')")
    elif kind in (AssertionKind.HEADER_PRESENT, AssertionKind.BODY_CONTAINS):
        _require_text(expected, f"{where}.expected")
    elif kind == AssertionKind.JSON_PATH_EQUALS:
        _require_object(expected, f"{where}.expected", JSON_PATH_KEYS, ("path", "value"))
        try:
            parse_json_path(expected["path"])
        except ValueError as e:
            raise SchemaViolation(f"{where}.expected.path: {e}")
        expected = {"path": expected["path"], "value": expected["value"]}
    return Assertion(kind=kind, expected=expected)


def _parse_request(raw: Any, where: str) -> HttpStep:
    data = _require_object(raw, where, REQUEST_KEYS, ("method", "path"))
    method = _require_text(data["method"], f"{where}.method").upper()
    if method not in STEP_METHODS:
        raise SchemaViolation(f"{where}.method {method} is not one of {', '.join(STEP_METHODS)}")
    path = _require_text(data["path"], f"{where}.path")

    query_raw = data.get("query") or {}
    if not isinstance(query_raw, dict):
        raise SchemaViolation(f"{where}.query must be an object")
    query = tuple((str(k), _query_value(v, f"{where}.query.{k}")) for k, v in query_raw.items())

    headers_raw = data.get("headers") or {}
    if not isinstance(headers_raw, dict):
        raise SchemaViolation(f"{where}.headers must be an object")
    seen: set[str] = set()
    headers = []
    for key, value in headers_raw.items():
        if key.lower() in seen:
            raise SchemaViolation(f"{where}.headers repeats {key!r} (header names are case-insensitive)")
        seen.add(key.lower())
        headers.append((key, _require_text(value, f"{where}.headers.{key}", allow_empty=True)))

    media_type = data.get("bodyMediaType")
    if media_type is not None:
        media_type = _require_text(media_type, f"{where}.bodyMediaType")

    authenticate = data.get("authenticate", False)
    if not isinstance(authenticate, bool):
        raise SchemaViolation(f"{where}.authenticate must be a boolean")

    return HttpStep(
        method=method,
        path=path,
        query=query,
        headers=tuple(headers),
        body=data.get("body"),
        body_media_type=media_type,
        authenticate=authenticate,
    )


def _parse_test(raw: Any, where: str) -> TestCase:
    data = _require_object(raw, where, TEST_KEYS, ("id", "name", "request", "assertions"))
    test_id = _require_text(data["id"], f"{where}.id")
    name = _require_text(data["name"], f"{where}.name")
    step = _parse_request(data["request"], f"{where}.request")
    if not isinstance(data["assertions"], list) or not data["assertions"]:
        raise SchemaViolation(f"{where}.assertions must be a non-empty list")
    assertions = tuple(
        _parse_assertion(a, f"{where}.assertions[{i}]") for i, a in enumerate(data["assertions"])
    )
    return TestCase(id=test_id, name=name, step=step, assertions=assertions)


def suite_from_dict(data: Any) -> TestSuite:
    data = _require_object(data, "suite document", SUITE_KEYS, ("tests",))
    name = _require_text(data.get("suite", ""), "suite", allow_empty=True)
    if not isinstance(data["tests"], list):
        raise SchemaViolation("tests must be a list")
    tests = []
    seen: set[str] = set()
    for i, raw in enumerate(data["tests"]):
        test = _parse_test(raw, f"tests[{i}]")
        if test.id in seen:
            raise DuplicateId(f"Test id {test.id!r} appears more than once")
        seen.add(test.id)
        tests.append(test)
    return TestSuite(name=name, tests=tuple(tests))


def parse_suite(document: bytes) -> TestSuite:
    try:
        text = document.decode("utf-8") if isinstance(document, bytes) else document
        data = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SuiteSyntaxError(f"Suite document is not valid JSON: {e}") from e
    return suite_from_dict(data)


def read_suite_file(path: str) -> TestSuite:
    with open(path, "rb") as f:
        return parse_suite(f.read())


# ----------------------------------------------------------
# Rendering
# ----------------------------------------------------------
def _assertion_to_dict(assertion: Assertion) -> dict[str, Any]:
    return {"kind": assertion.kind.value, "expected": assertion.expected}


def _test_to_dict(test: TestCase) -> dict[str, Any]:
    step = test.step
    return {
        "id": test.id,
        "name": test.name,
        "request": {
            "method": step.method,
            "path": step.path,
            "query": dict(step.query),
            "headers": dict(step.headers),
            "body": step.body,
            "bodyMediaType": step.body_media_type,
            "authenticate": step.authenticate,
        },
        "assertions": [_assertion_to_dict(a) for a in test.assertions],
    }


def suite_to_dict(suite: TestSuite) -> dict[str, Any]:
    return {"suite": suite.name, "tests": [_test_to_dict(t) for t in suite.tests]}


def render_suite(suite: TestSuite) -> bytes:
    return canonical_json(suite_to_dict(suite)).encode("utf-8")


# ----------------------------------------------------------
# Agent output handling
# ----------------------------------------------------------
def extract_suite_document(text: str) -> Optional[bytes]:
    """
    Pull the suite document out of an agent reply.

    Takes the first fenced ```json block, else the outermost {...} span.
    Returns None when neither is present.
    """
    fenced = FENCED_JSON.search(text)
    if fenced:
        return fenced.group(1).strip().encode("utf-8")
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end < start:
        return None
    return text[start:end + 1].encode("utf-8")


def merge_suites(name: str, suites: Iterable[TestSuite]) -> TestSuite:
    """Concatenate suites; colliding ids get the source suite name as prefix."""
    merged: list[TestCase] = []
    seen: set[str] = set()
    for suite in suites:
        for test in suite.tests:
            test_id = test.id
            if test_id in seen:
                base = f"{suite.name}.{test.id}" if suite.name else test.id
                test_id, n = base, 2
                while test_id in seen:
                    test_id = f"{base}.{n}"
                    n += 1
            seen.add(test_id)
            merged.append(TestCase(id=test_id, name=test.name, step=test.step, assertions=test.assertions))
    return TestSuite(name=name, tests=tuple(merged))


def request_media_type(step: HttpStep) -> Optional[str]:
    return normalize_media_type(step.body_media_type or step.header("Content-Type"))
