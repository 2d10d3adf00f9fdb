"""
Run report: test statistics, failure categorization, structural coverage and
LLM usage, one column per configuration (Initial, Single-Agent, Multi-Agent).
"""
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping, Optional

from src.coverage.model import CoverageReport, Criterion
from src.errors import DomainMismatch, InconsistentInputs
from src.executor.results import FailureBreakdown, TestStats
from src.llm.usage import EnergyModel, PricingModel, RoleUsage, UsageLedger, cost_of, energy_of

INITIAL = "initial"
SINGLE = "single"
MULTI = "multi"

CONFIGURATION_TITLES = {
    INITIAL: "Initial",
    SINGLE: "Single-Agent",
    MULTI: "Multi-Agent",
}


def configuration_title(label: str) -> str:
    return CONFIGURATION_TITLES.get(label, label)


def order_configurations(labels) -> list[str]:
    """Initial, Single-Agent, Multi-Agent first; anything else after, in the given order."""
    labels = list(dict.fromkeys(labels))
    known = [label for label in CONFIGURATION_TITLES if label in labels]
    return known + [label for label in labels if label not in CONFIGURATION_TITLES]


@dataclass(frozen=True)
class UsageSummary:
    minutes: float
    input_tokens: int
    output_tokens: int
    cost: Decimal
    energy_wh: float
    by_role: dict[str, RoleUsage] = field(default_factory=dict)

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    def to_dict(self) -> dict[str, Any]:
        return {
            "minutes": self.minutes,
            "inputTokens": self.input_tokens,
            "outputTokens": self.output_tokens,
            "totalTokens": self.total_tokens,
            "cost": str(self.cost),
            "energyWh": self.energy_wh,
            "byRole": {
                role: {
                    "calls": usage.calls,
                    "inputTokens": usage.input_tokens,
                    "outputTokens": usage.output_tokens,
                    "wallTime": usage.wall_time,
                }
                for role, usage in self.by_role.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "UsageSummary":
        return cls(
            minutes=float(data["minutes"]),
            input_tokens=int(data["inputTokens"]),
            output_tokens=int(data["outputTokens"]),
            cost=Decimal(str(data["cost"])),
            energy_wh=float(data["energyWh"]),
            by_role={
                role: RoleUsage(
                    calls=int(item["calls"]),
                    input_tokens=int(item["inputTokens"]),
                    output_tokens=int(item["outputTokens"]),
                    wall_time=float(item.get("wallTime", 0.0)),
                )
                for role, item in data.get("byRole", {}).items()
            },
        )


def summarize_usage(
    ledger: UsageLedger, pricing: PricingModel, energy: EnergyModel, minutes: Optional[float] = None
) -> UsageSummary:
    return UsageSummary(
        minutes=ledger.wall_time / 60 if minutes is None else minutes,
        input_tokens=ledger.input_tokens,
        output_tokens=ledger.output_tokens,
        cost=cost_of(ledger, pricing),
        energy_wh=energy_of(ledger, energy),
        by_role=ledger.by_role(),
    )


@dataclass(frozen=True)
class ConfigurationReport:
    label: str
    stats: Optional[TestStats] = None
    coverage: Optional[CoverageReport] = None
    usage: Optional[UsageSummary] = None

    @property
    def title(self) -> str:
        return configuration_title(self.label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "title": self.title,
            "stats": self.stats.to_dict() if self.stats else None,
            "coverage": self.coverage.to_dict() if self.coverage else None,
            "usage": self.usage.to_dict() if self.usage else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ConfigurationReport":
        stats = data.get("stats")
        return cls(
            label=data["label"],
            stats=(
                TestStats.from_counts(stats["successful"], stats["assertionErrors"], stats["otherRuntimeErrors"])
                if stats
                else None
            ),
            coverage=CoverageReport.from_dict(data["coverage"]) if data.get("coverage") else None,
            usage=UsageSummary.from_dict(data["usage"]) if data.get("usage") else None,
        )


@dataclass(frozen=True)
class RunReport:
    system: str
    configurations: tuple[ConfigurationReport, ...] = ()

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.configurations]

    def configuration(self, label: str) -> ConfigurationReport:
        for configuration in self.configurations:
            if configuration.label == label:
                return configuration
        raise KeyError(label)

    def to_dict(self) -> dict[str, Any]:
        return {"system": self.system, "configurations": [c.to_dict() for c in self.configurations]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunReport":
        return cls(
            system=data["system"],
            configurations=tuple(ConfigurationReport.from_dict(c) for c in data.get("configurations", [])),
        )


def _check_stats(label: str, stats: TestStats, failures: Optional[FailureBreakdown]):
    if stats.generated != stats.successful + stats.failed:
        raise InconsistentInputs(
            f"{label}: generated {stats.generated} != successful {stats.successful} + failed {stats.failed}"
        )
    if failures is not None and failures.total != stats.failed:
        raise InconsistentInputs(
            f"{label}: failure categories sum to {failures.total}, but {stats.failed} tests failed"
        )


def build_report(
    system: str,
    stats: Mapping[str, TestStats],
    failures: Mapping[str, FailureBreakdown],
    coverage_by_config: Mapping[str, CoverageReport],
    ledgers: Mapping[str, UsageLedger],
    pricing: Optional[PricingModel] = None,
    energy: Optional[EnergyModel] = None,
    minutes: Optional[Mapping[str, float]] = None,
) -> RunReport:
    """
    Assemble one report column per configuration label seen in any input.

    A failure breakdown given separately from the stats replaces the one the
    stats carry, after checking that it partitions the failed count.
    """
    pricing = pricing or PricingModel()
    energy = energy or EnergyModel()
    minutes = minutes or {}
    for label in failures:
        if label not in stats:
            raise InconsistentInputs(f"Failure categories given for {label} without test statistics")

    labels = order_configurations([*stats, *coverage_by_config, *ledgers])
    configurations = []
    for label in labels:
        config_stats = stats.get(label)
        if config_stats is not None:
            breakdown = failures.get(label)
            _check_stats(label, config_stats, breakdown)
            if breakdown is not None:
                config_stats = TestStats(config_stats.generated, config_stats.successful, config_stats.failed, breakdown)
        ledger = ledgers.get(label)
        configurations.append(
            ConfigurationReport(
                label=label,
                stats=config_stats,
                coverage=coverage_by_config.get(label),
                usage=summarize_usage(ledger, pricing, energy, minutes.get(label)) if ledger is not None else None,
            )
        )
    return RunReport(system, tuple(configurations))


# ----------------------------------------------------------
# Configuration comparison
# ----------------------------------------------------------
@dataclass(frozen=True)
class CoverageDelta:
    criterion: Criterion
    before: Optional[float]
    after: Optional[float]

    @property
    def points(self) -> Optional[float]:
        """Signed percentage-point change; None where the criterion does not apply."""
        if self.before is None or self.after is None:
            return None
        return (self.after - self.before) * 100


def compare_configurations(a: CoverageReport, b: CoverageReport) -> dict[Criterion, CoverageDelta]:
    deltas = {}
    for result_a in a.results:
        try:
            result_b = b.result(result_a.criterion)
        except KeyError:
            raise DomainMismatch(f"{result_a.criterion.label} coverage is missing from the second report")
        if result_a.denominator != result_b.denominator:
            raise DomainMismatch(
                f"{result_a.criterion.label} denominators differ: {result_a.denominator} vs {result_b.denominator}"
            )
        deltas[result_a.criterion] = CoverageDelta(result_a.criterion, result_a.ratio, result_b.ratio)
    return deltas
