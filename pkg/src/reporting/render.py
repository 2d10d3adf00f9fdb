import csv
import io
import json
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Callable, Iterable, Optional

from src.coverage.model import Criterion
from src.reporting.report import (
    MULTI,
    SINGLE,
    ConfigurationReport,
    CoverageDelta,
    RunReport,
    compare_configurations,
    configuration_title,
)
from src.utils import canonical_json

NOT_APPLICABLE = "N/A"

EXECUTION_STATISTICS = "Test Execution Statistics"
FAILURE_CATEGORIES = "Categorization of Failed Test Cases"
STRUCTURAL_COVERAGE = "Structural API Coverage"
LLM_USAGE = "LLM Usage Statistics"


class ReportFormat(str, Enum):
    JSON = "json"
    MARKDOWN = "markdown"
    CSV = "csv"


def format_percent(ratio: Optional[float]) -> str:
    return NOT_APPLICABLE if ratio is None else f"{ratio * 100:.1f}%"


def format_money(amount: Decimal) -> str:
    return str(amount.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_fixed(value: float) -> str:
    return str(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


# ----------------------------------------------------------
# Table rows: (metric, cell) per section
# ----------------------------------------------------------
Cell = Callable[[ConfigurationReport], str]


def _stat(getter) -> Cell:
    return lambda c: NOT_APPLICABLE if c.stats is None else str(getter(c.stats))


def _usage(getter) -> Cell:
    return lambda c: NOT_APPLICABLE if c.usage is None else getter(c.usage)


def _coverage(criterion: Criterion) -> Cell:
    def cell(c: ConfigurationReport) -> str:
        if c.coverage is None:
            return NOT_APPLICABLE
        result = c.coverage.result(criterion)
        if not result.applicable:
            return NOT_APPLICABLE
        return f"{result.percent()} ({result.numerator}/{result.denominator})"

    return cell


SECTIONS: list[tuple[str, str, list[tuple[str, Cell]]]] = [
    (
        EXECUTION_STATISTICS,
        "Metric",
        [
            ("Generated", _stat(lambda s: s.generated)),
            ("Successful", _stat(lambda s: s.successful)),
            ("Failed", _stat(lambda s: s.failed)),
            ("Success rate", lambda c: NOT_APPLICABLE if c.stats is None else format_percent(c.stats.success_rate())),
        ],
    ),
    (
        FAILURE_CATEGORIES,
        "Category",
        [
            ("Assertion errors", _stat(lambda s: s.failures.assertion_errors)),
            ("Other runtime errors", _stat(lambda s: s.failures.other_runtime_errors)),
            (
                "Assertion share",
                lambda c: NOT_APPLICABLE if c.stats is None else format_percent(c.stats.failures.assertion_share()),
            ),
        ],
    ),
    (
        STRUCTURAL_COVERAGE,
        "Criterion",
        [(criterion.label, _coverage(criterion)) for criterion in Criterion],
    ),
    (
        LLM_USAGE,
        "Metric",
        [
            ("Time (m)", _usage(lambda u: format_fixed(u.minutes))),
            ("Input tokens", _usage(lambda u: str(u.input_tokens))),
            ("Output tokens", _usage(lambda u: str(u.output_tokens))),
            ("Total tokens", _usage(lambda u: str(u.total_tokens))),
            ("Cost", _usage(lambda u: format_money(u.cost))),
            ("Energy (Wh)", _usage(lambda u: format_fixed(u.energy_wh))),
        ],
    ),
]


def _table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines


def _role_rows(report: RunReport) -> list[list[str]]:
    roles = list(dict.fromkeys(role for c in report.configurations if c.usage for role in c.usage.by_role))
    rows = []
    for role in roles:
        row = [role]
        for c in report.configurations:
            usage = c.usage.by_role.get(role) if c.usage else None
            row.append(NOT_APPLICABLE if usage is None else f"{usage.calls} calls, {usage.total_tokens} tokens")
        rows.append(row)
    return rows


def _sections(only: Optional[Iterable[str]]):
    if only is None:
        return SECTIONS
    only = set(only)
    return [s for s in SECTIONS if s[0] in only]


def _coverage_gain(report: RunReport) -> Optional[str]:
    """Single- to multi-agent deltas, when both configurations carry coverage."""
    if SINGLE not in report.labels or MULTI not in report.labels:
        return None
    single, multi = report.configuration(SINGLE).coverage, report.configuration(MULTI).coverage
    if single is None or multi is None:
        return None
    return render_deltas(SINGLE, MULTI, compare_configurations(single, multi))


def render_markdown(report: RunReport, sections: Optional[Iterable[str]] = None) -> str:
    titles = [c.title for c in report.configurations]
    lines = [f"# {report.system}", ""]
    for title, first_column, rows in _sections(sections):
        lines.append(f"## {title}")
        lines.append("")
        table_rows = [[metric, *(cell(c) for c in report.configurations)] for metric, cell in rows]
        lines.extend(_table([first_column, *titles], table_rows))
        lines.append("")
        gain = _coverage_gain(report) if title == STRUCTURAL_COVERAGE else None
        if gain:
            lines.append("### Coverage Gain")
            lines.append("")
            lines.append(gain.rstrip("\n"))
            lines.append("")
    role_rows = _role_rows(report)
    if role_rows and (sections is None or LLM_USAGE in sections):
        lines.append("### Usage by Role")
        lines.append("")
        lines.extend(_table(["Role", *titles], role_rows))
        lines.append("")
    return "\n".join(lines)


def render_csv(report: RunReport, sections: Optional[Iterable[str]] = None) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["system", "section", "metric", "configuration", "value"])
    for title, _, rows in _sections(sections):
        for metric, cell in rows:
            for c in report.configurations:
                writer.writerow([report.system, title, metric, c.title, cell(c)])
    return buffer.getvalue()


def render_report(report: RunReport, format: ReportFormat | str, sections: Optional[Iterable[str]] = None) -> bytes:
    """JSON always carries the full report; sections only narrows the tables."""
    format = ReportFormat(format)
    if format == ReportFormat.JSON:
        text = canonical_json(report.to_dict())
    elif format == ReportFormat.MARKDOWN:
        text = render_markdown(report, sections)
    else:
        text = render_csv(report, sections)
    return text.encode("utf-8")


def render_deltas(before: str, after: str, deltas: dict[Criterion, CoverageDelta]) -> str:
    """Markdown table of percentage-point changes between two configurations."""
    header = ["Criterion", configuration_title(before), configuration_title(after), "Delta (pp)"]
    rows = []
    for criterion, delta in deltas.items():
        points = delta.points
        rows.append(
            [
                criterion.label,
                format_percent(delta.before),
                format_percent(delta.after),
                NOT_APPLICABLE if points is None else f"{points:+.1f}",
            ]
        )
    return "\n".join(_table(header, rows)) + "\n"


def parse_report(content: bytes) -> RunReport:
    return RunReport.from_dict(json.loads(content.decode("utf-8")))
