import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

STEP_METHODS = ("GET", "POST", "PUT", "PATCH", "DELETE")


class AssertionKind(str, Enum):
    STATUS_EQUALS = "status_equals"
    STATUS_CLASS_EQUALS = "status_class_equals"
    HEADER_PRESENT = "header_present"
    BODY_CONTAINS = "body_contains"
    JSON_PATH_EQUALS = "json_path_equals"


@dataclass(frozen=True)
class Assertion:
    kind: AssertionKind
    expected: Any

    def describe(self) -> str:
        if self.kind == AssertionKind.JSON_PATH_EQUALS:
            return f"{self.kind.value} {self.expected['path']} == {json.dumps(self.expected['value'])}"
        return f"{self.kind.value} {self.expected}"


@dataclass(frozen=True)
class HttpStep:
    method: str
    path: str
    query: tuple[tuple[str, str], ...] = ()
    headers: tuple[tuple[str, str], ...] = ()
    body: Any = None
    body_media_type: Optional[str] = None
    authenticate: bool = False

    @property
    def has_body(self) -> bool:
        return self.body is not None and self.body != ""

    def body_text(self) -> str:
        """Body as sent on the wire: strings verbatim, other JSON values compactly encoded."""
        if self.body is None:
            return ""
        if isinstance(self.body, str):
            return self.body
        return json.dumps(self.body, ensure_ascii=False, separators=(",", ":"))

    def header(self, name: str) -> Optional[str]:
        name = name.lower()
        for key, value in self.headers:
            if key.lower() == name:
                return value
        return None


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    id: str
    name: str
    step: HttpStep
    assertions: tuple[Assertion, ...] = ()


@dataclass(frozen=True)
class TestSuite:
    __test__ = False

    name: str = ""
    tests: tuple[TestCase, ...] = ()

    def __len__(self) -> int:
        return len(self.tests)

    @property
    def ids(self) -> list[str]:
        return [t.id for t in self.tests]

    def test(self, test_id: str) -> TestCase:
        for test in self.tests:
            if test.id == test_id:
                return test
        raise KeyError(test_id)


class IssueKind(str, Enum):
    UNRESOLVED_PLACEHOLDER = "unresolved_placeholder"
    UNKNOWN_VARIABLE = "unknown_variable"
    INVALID_STEP_SHAPE = "invalid_step_shape"


@dataclass(frozen=True)
class RefinementIssue:
    test_id: str
    kind: IssueKind
    detail: str

    def __str__(self) -> str:
        return f"[{self.test_id}] {self.kind.value}: {self.detail}"

    def to_dict(self) -> dict[str, str]:
        return {"testId": self.test_id, "kind": self.kind.value, "detail": self.detail}


# ----------------------------------------------------------
# JSON path subset: $, .name, ['name'], [index]
# ----------------------------------------------------------
_JSON_PATH_TOKEN = re.compile(r"\.([A-Za-z_$][\w$-]*)|\[(\d+)\]|\['([^']*)'\]|\[\"([^\"]*)\"\]")
_MISSING = object()


def parse_json_path(path: str) -> list[Any]:
    if not isinstance(path, str) or not path.startswith("$"):
        raise ValueError(f"JSON path must start with '$': {path!r}")
    steps: list[Any] = []
    position = 1
    while position < len(path):
        token = _JSON_PATH_TOKEN.match(path, position)
        if token is None:
            raise ValueError(f"Unsupported JSON path syntax at {path[position:]!r}")
        name, index, quoted, double_quoted = token.groups()
        if index is not None:
            steps.append(int(index))
        else:
            steps.append(next(v for v in (name, quoted, double_quoted) if v is not None))
        position = token.end()
    return steps


def evaluate_json_path(document: Any, path: str) -> Any:
    """Return the value at `path`; check the result with is_missing()."""
    current = document
    for step in parse_json_path(path):
        if isinstance(step, int):
            if not isinstance(current, list) or step >= len(current):
                return _MISSING
            current = current[step]
        else:
            if not isinstance(current, dict) or step not in current:
                return _MISSING
            current = current[step]
    return current


def is_missing(value: Any) -> bool:
    return value is _MISSING
