from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Optional

from src.suite.model import Assertion, AssertionKind


class Outcome(str, Enum):
    PASSED = "passed"
    ASSERTION_FAILED = "assertion_failed"
    RUNTIME_ERROR = "runtime_error"


class FailureCategory(str, Enum):
    SUCCESS = "success"
    ASSERTION_ERROR = "assertion_error"
    OTHER_RUNTIME_ERROR = "other_runtime_error"


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    test_id: str
    outcome: Outcome
    failed_assertion: Optional[Assertion] = None
    observed: Any = None
    error_detail: Optional[str] = None
    status: Optional[int] = None

    def __post_init__(self):
        if self.outcome == Outcome.ASSERTION_FAILED and self.failed_assertion is None:
            raise ValueError("assertion_failed results need the failed assertion")
        if self.outcome == Outcome.RUNTIME_ERROR and not self.error_detail:
            raise ValueError("runtime_error results need an error detail")

    @classmethod
    def passed(cls, test_id: str, status: int) -> "TestResult":
        return cls(test_id, Outcome.PASSED, status=status)

    @classmethod
    def assertion_failed(cls, test_id: str, assertion: Assertion, observed: Any, status: int) -> "TestResult":
        return cls(test_id, Outcome.ASSERTION_FAILED, failed_assertion=assertion, observed=observed, status=status)

    @classmethod
    def runtime_error(cls, test_id: str, detail: str, status: Optional[int] = None) -> "TestResult":
        return cls(test_id, Outcome.RUNTIME_ERROR, error_detail=detail, status=status)

    def console_line(self) -> str:
        if self.outcome == Outcome.PASSED:
            return f"PASSED {self.test_id}"
        if self.outcome == Outcome.ASSERTION_FAILED:
            return f"ASSERTION FAILED {self.test_id}: expected {self.failed_assertion.describe()}, observed {self.observed!r}"
        return f"RUNTIME ERROR {self.test_id}: {self.error_detail}"

    def to_dict(self) -> dict[str, Any]:
        failed = None
        if self.failed_assertion is not None:
            failed = {"kind": self.failed_assertion.kind.value, "expected": self.failed_assertion.expected}
        return {
            "testId": self.test_id,
            "outcome": self.outcome.value,
            "status": self.status,
            "failedAssertion": failed,
            "observed": self.observed,
            "errorDetail": self.error_detail,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TestResult":
        failed = data.get("failedAssertion")
        return cls(
            test_id=data["testId"],
            outcome=Outcome(data["outcome"]),
            failed_assertion=Assertion(AssertionKind(failed["kind"]), failed["expected"]) if failed else None,
            observed=data.get("observed"),
            error_detail=data.get("errorDetail"),
            status=data.get("status"),
        )


def classify_outcome(result: TestResult) -> FailureCategory:
    return {
        Outcome.PASSED: FailureCategory.SUCCESS,
        Outcome.ASSERTION_FAILED: FailureCategory.ASSERTION_ERROR,
        Outcome.RUNTIME_ERROR: FailureCategory.OTHER_RUNTIME_ERROR,
    }[result.outcome]


@dataclass(frozen=True)
class FailureBreakdown:
    assertion_errors: int = 0
    other_runtime_errors: int = 0

    @property
    def total(self) -> int:
        return self.assertion_errors + self.other_runtime_errors

    def assertion_share(self) -> Optional[float]:
        return self.assertion_errors / self.total if self.total else None

    def to_dict(self) -> dict[str, int]:
        return {"assertionErrors": self.assertion_errors, "otherRuntimeErrors": self.other_runtime_errors}


@dataclass(frozen=True)
class TestStats:
    __test__ = False

    generated: int = 0
    successful: int = 0
    failed: int = 0
    failures: FailureBreakdown = FailureBreakdown()

    def success_rate(self) -> Optional[float]:
        return self.successful / self.generated if self.generated else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "generated": self.generated,
            "successful": self.successful,
            "failed": self.failed,
            **self.failures.to_dict(),
        }

    @classmethod
    def from_counts(cls, successful: int, assertion_errors: int, other_runtime_errors: int) -> "TestStats":
        failures = FailureBreakdown(assertion_errors, other_runtime_errors)
        return cls(
            generated=successful + failures.total,
            successful=successful,
            failed=failures.total,
            failures=failures,
        )


def summarize_results(results: Iterable[TestResult]) -> TestStats:
    counts = {category: 0 for category in FailureCategory}
    for result in results:
        counts[classify_outcome(result)] += 1
    return TestStats.from_counts(
        successful=counts[FailureCategory.SUCCESS],
        assertion_errors=counts[FailureCategory.ASSERTION_ERROR],
        other_runtime_errors=counts[FailureCategory.OTHER_RUNTIME_ERROR],
    )


def format_console(results: Iterable[TestResult]) -> str:
    results = list(results)
    stats = summarize_results(results)
    lines = [r.console_line() for r in results]
    lines.append(
        f"{stats.generated} tests, {stats.successful} passed, "
        f"{stats.failures.assertion_errors} assertion failures, {stats.failures.other_runtime_errors} runtime errors"
    )
    return "\n".join(lines) + "\n"
