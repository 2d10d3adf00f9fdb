from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Optional

OperationKey = tuple[str, str]
ParameterKey = tuple[str, str]


class Criterion(str, Enum):
    PATH = "paths"
    OPERATION = "operations"
    STATUS_CLASS = "status_classes"
    STATUS = "statuses"
    RESPONSE_TYPE = "response_types"
    REQUEST_TYPE = "request_types"
    PARAMETER = "parameters"
    PARAMETER_VALUE = "parameter_values"

    @property
    def label(self) -> str:
        return CRITERION_LABELS[self]


CRITERION_LABELS = {
    Criterion.PATH: "Path",
    Criterion.OPERATION: "Operation",
    Criterion.STATUS_CLASS: "Status Class",
    Criterion.STATUS: "Status",
    Criterion.RESPONSE_TYPE: "Response Type",
    Criterion.REQUEST_TYPE: "Request Type",
    Criterion.PARAMETER: "Parameter",
    Criterion.PARAMETER_VALUE: "Parameter Value (enum/boolean)",
}


@dataclass(frozen=True)
class CoverageSets:
    paths: frozenset[str] = frozenset()
    operations: frozenset[OperationKey] = frozenset()
    statuses: frozenset[tuple[OperationKey, int]] = frozenset()
    status_classes: frozenset[tuple[OperationKey, int]] = frozenset()
    response_types: frozenset[tuple[OperationKey, str]] = frozenset()
    request_types: frozenset[tuple[OperationKey, str]] = frozenset()
    parameters: frozenset[tuple[OperationKey, ParameterKey]] = frozenset()
    parameter_values: frozenset[tuple[OperationKey, ParameterKey, str]] = frozenset()

    def get(self, criterion: Criterion) -> frozenset:
        return getattr(self, criterion.value)

    def union(self, other: "CoverageSets") -> "CoverageSets":
        return type(self)(**{f.name: getattr(self, f.name) | getattr(other, f.name) for f in fields(self)})

    def is_empty(self) -> bool:
        return all(not getattr(self, f.name) for f in fields(self))

    def to_dict(self) -> dict[str, list[Any]]:
        return {c.value: sorted(_jsonable(item) for item in self.get(c)) for c in Criterion}


class CoverageDomains(CoverageSets):
    """Denominator sets of every coverage criterion, as enumerated from a spec."""


@dataclass(frozen=True)
class CoverageObservations:
    documented: CoverageSets = field(default_factory=CoverageSets)
    undocumented: CoverageSets = field(default_factory=CoverageSets)


@dataclass(frozen=True)
class CriterionResult:
    criterion: Criterion
    numerator: int
    denominator: int

    @property
    def applicable(self) -> bool:
        return self.denominator > 0

    @property
    def ratio(self) -> Optional[float]:
        if not self.applicable:
            return None
        return self.numerator / self.denominator

    def percent(self) -> str:
        return "N/A" if self.ratio is None else f"{self.ratio * 100:.1f}%"

    def to_dict(self) -> dict[str, Any]:
        return {
            "criterion": self.criterion.value,
            "label": self.criterion.label,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "ratio": self.ratio,
            "percent": self.percent(),
        }


@dataclass(frozen=True)
class CoverageReport:
    results: tuple[CriterionResult, ...]
    undocumented: CoverageSets = field(default_factory=CoverageSets)

    def result(self, criterion: Criterion) -> CriterionResult:
        for result in self.results:
            if result.criterion == criterion:
                return result
        raise KeyError(criterion)

    def ratio(self, criterion: Criterion) -> Optional[float]:
        return self.result(criterion).ratio

    def to_dict(self) -> dict[str, Any]:
        return {
            "criteria": [r.to_dict() for r in self.results],
            "undocumented": self.undocumented.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CoverageReport":
        results = tuple(
            CriterionResult(Criterion(item["criterion"]), int(item["numerator"]), int(item["denominator"]))
            for item in data.get("criteria", [])
        )
        return cls(results=results)


def _jsonable(item: Any) -> Any:
    if isinstance(item, tuple):
        return [_jsonable(i) for i in item]
    return item
