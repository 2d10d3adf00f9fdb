"""
Token usage ledger with derived cost and energy.

Token counts always come from the backend's own usage report. Ledgers are
values: recording returns a new ledger and leaves the input untouched.
"""
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Iterable, Optional

from src.errors import ConfigError

MILLION = Decimal(1_000_000)


@dataclass(frozen=True)
class UsageEntry:
    role: str
    input_tokens: int
    output_tokens: int
    wall_time: float = 0.0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be >= 0")

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role,
            "inputTokens": self.input_tokens,
            "outputTokens": self.output_tokens,
            "wallTime": round(self.wall_time, 3),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "UsageEntry":
        return cls(
            role=str(data.get("role", "")),
            input_tokens=int(data["inputTokens"]),
            output_tokens=int(data["outputTokens"]),
            wall_time=float(data.get("wallTime", 0.0)),
        )


@dataclass(frozen=True)
class RoleUsage:
    calls: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    wall_time: float = 0.0

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens


@dataclass(frozen=True)
class UsageLedger:
    entries: tuple[UsageEntry, ...] = ()

    @property
    def input_tokens(self) -> int:
        return sum(e.input_tokens for e in self.entries)

    @property
    def output_tokens(self) -> int:
        return sum(e.output_tokens for e in self.entries)

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    @property
    def wall_time(self) -> float:
        return sum(e.wall_time for e in self.entries)

    def by_role(self) -> dict[str, RoleUsage]:
        totals: dict[str, RoleUsage] = {}
        for entry in self.entries:
            current = totals.get(entry.role, RoleUsage())
            totals[entry.role] = RoleUsage(
                calls=current.calls + 1,
                input_tokens=current.input_tokens + entry.input_tokens,
                output_tokens=current.output_tokens + entry.output_tokens,
                wall_time=current.wall_time + entry.wall_time,
            )
        return totals

    def merge(self, *others: "UsageLedger") -> "UsageLedger":
        entries = list(self.entries)
        for other in others:
            entries.extend(other.entries)
        return UsageLedger(tuple(entries))

    def to_dict(self) -> dict[str, Any]:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "inputTokens": self.input_tokens,
            "outputTokens": self.output_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "UsageLedger":
        return cls(tuple(UsageEntry.from_dict(e) for e in data.get("entries", [])))


def record_usage(ledger: UsageLedger, role: str, entry: UsageEntry) -> UsageLedger:
    if entry.role != role:
        entry = UsageEntry(role, entry.input_tokens, entry.output_tokens, entry.wall_time)
    return UsageLedger(ledger.entries + (entry,))


def merge_ledgers(ledgers: Iterable[UsageLedger]) -> UsageLedger:
    return UsageLedger().merge(*ledgers)


# ----------------------------------------------------------
# Pricing / energy
# ----------------------------------------------------------
@dataclass(frozen=True)
class PricingModel:
    """Rates per 1M tokens. The currency is whatever the rates are written in."""

    input_per_million: Decimal = Decimal(0)
    output_per_million: Decimal = Decimal(0)

    @classmethod
    def from_dict(cls, data: Optional[dict[str, Any]]) -> "PricingModel":
        data = data or {}
        try:
            pricing = cls(
                input_per_million=Decimal(str(data.get("input_per_million", 0))),
                output_per_million=Decimal(str(data.get("output_per_million", 0))),
            )
        except ArithmeticError as e:
            raise ConfigError(f"Invalid pricing rate: {e}") from e
        if pricing.input_per_million < 0 or pricing.output_per_million < 0:
            raise ConfigError("pricing rates must be >= 0")
        return pricing


@dataclass(frozen=True)
class EnergyModel:
    wh_per_token: float = 0.00006

    @classmethod
    def from_value(cls, value: Any) -> "EnergyModel":
        try:
            wh = float(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid energy coefficient: {value!r}") from e
        if wh < 0:
            raise ConfigError("energy_wh_per_token must be >= 0")
        return cls(wh)


def cost_of(ledger: UsageLedger, pricing: PricingModel) -> Decimal:
    return (
        Decimal(ledger.input_tokens) * pricing.input_per_million
        + Decimal(ledger.output_tokens) * pricing.output_per_million
    ) / MILLION


def energy_of(ledger: UsageLedger, energy: EnergyModel) -> float:
    """Watt-hours."""
    return ledger.total_tokens * energy.wh_per_token
