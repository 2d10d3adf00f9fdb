"""
Refinement linter: the machine-checkable part of turning generated tests into
runnable ones.

Issues are computed per test with no cross-test coupling, so the issue count
of a suite is the sum over its tests. Only unknown_variable depends on the
variable bindings, so adding bindings never adds issues.
"""
import logging
from typing import Iterator, Mapping, Optional

from src.coverage.matcher import match_path
from src.errors import AmbiguousMatch
from src.openapi.model import ApiSpec
from src.suite.codec import request_media_type
from src.suite.model import IssueKind, RefinementIssue, TestCase, TestSuite
from src.suite.placeholders import find_placeholders, find_variables, is_markup, is_symbolic_segment

logger = logging.getLogger(__name__)


def _text_fields(test: TestCase) -> Iterator[tuple[str, str]]:
    step = test.step
    yield "request.path", step.path
    for key, value in step.query:
        yield f"request.query.{key}", f"{key}={value}"
    for key, value in step.headers:
        yield f"request.headers.{key}", f"{key}: {value}"
    if step.has_body and not is_markup(request_media_type(step) or ""):
        yield "request.body", step.body_text()


def _shape_issues(test: TestCase, spec: Optional[ApiSpec]) -> list[RefinementIssue]:
    step = test.step
    issues = []
    if step.has_body and request_media_type(step) is None:
        issues.append(RefinementIssue(test.id, IssueKind.INVALID_STEP_SHAPE, "request body has no media type"))
    if spec is None:
        return issues

    try:
        matched = match_path(spec, step.path, wildcard=is_symbolic_segment)
    except AmbiguousMatch:
        return issues
    if matched is None:
        issues.append(
            RefinementIssue(test.id, IssueKind.INVALID_STEP_SHAPE, f"path {step.path} matches no documented template")
        )
        return issues

    template = matched[0]
    operation = spec.operation(template, step.method)
    if operation is None:
        issues.append(
            RefinementIssue(test.id, IssueKind.INVALID_STEP_SHAPE, f"{step.method} is not documented for {template}")
        )
    elif operation.body_required and not step.has_body:
        issues.append(
            RefinementIssue(
                test.id,
                IssueKind.INVALID_STEP_SHAPE,
                f"{step.method} {template} requires a request body but none is given",
            )
        )
    return issues


def validate_test(
    test: TestCase, spec: Optional[ApiSpec] = None, variables: Optional[Mapping[str, str]] = None
) -> list[RefinementIssue]:
    variables = variables or {}
    issues = []
    for where, text in _text_fields(test):
        for placeholder in dict.fromkeys(find_placeholders(text)):
            issues.append(
                RefinementIssue(test.id, IssueKind.UNRESOLVED_PLACEHOLDER, f"{where} contains {placeholder}")
            )
        for name in dict.fromkeys(find_variables(text)):
            if name not in variables:
                issues.append(
                    RefinementIssue(test.id, IssueKind.UNKNOWN_VARIABLE, f"{where} uses unbound variable ${{{name}}}")
                )
    issues.extend(_shape_issues(test, spec))
    return issues


def validate_suite(
    suite: TestSuite, spec: Optional[ApiSpec] = None, variables: Optional[Mapping[str, str]] = None
) -> list[RefinementIssue]:
    issues = []
    for test in suite.tests:
        issues.extend(validate_test(test, spec, variables))
    if issues:
        logger.debug("Suite %r has %d refinement issue(s)", suite.name, len(issues))
    return issues


def count_by_kind(issues: list[RefinementIssue]) -> dict[str, int]:
    counts = {kind.value: 0 for kind in IssueKind}
    for issue in issues:
        counts[issue.kind.value] += 1
    return counts
