import csv
import io
from decimal import Decimal

import pytest

from src.coverage import Criterion, CoverageReport, CriterionResult, coverage_of
from src.errors import ConfigError, DomainMismatch, InconsistentInputs
from src.executor import FailureBreakdown, TestResult, TestStats, write_log_file
from src.llm import EnergyModel, PricingModel, UsageEntry, UsageLedger
from src.reporting import (
    INITIAL,
    MULTI,
    SINGLE,
    build_report,
    compare_configurations,
    copy_spec,
    label_for_suite,
    ledger_path,
    log_path,
    render_deltas,
    render_report,
    report_from_bundle,
    results_path,
    write_results,
)
from src.reporting.render import LLM_USAGE, STRUCTURAL_COVERAGE, parse_report
from src.suite.model import Assertion, AssertionKind
from src.utils import save_json
from tests.conftest import fixture_path, make_interaction

PRICING = PricingModel.from_dict({"input_per_million": "0.15", "output_per_million": "0.60"})
ENERGY = EnergyModel.from_value(0.00006)


def coverage(*pairs) -> CoverageReport:
    """One result per criterion, in Criterion order."""
    return CoverageReport(tuple(CriterionResult(c, n, d) for c, (n, d) in zip(Criterion, pairs)))


FULL_PAIRS = [(2, 8), (3, 20), (4, 10), (5, 30), (6, 12), (0, 0), (7, 40), (1, 4)]


@pytest.fixture
def report():
    return build_report(
        "Restful-Booker",
        stats={
            INITIAL: TestStats.from_counts(10, 0, 0),
            SINGLE: TestStats.from_counts(58, 52, 8),
        },
        failures={SINGLE: FailureBreakdown(52, 8)},
        coverage_by_config={INITIAL: coverage(*FULL_PAIRS), SINGLE: coverage(*FULL_PAIRS)},
        ledgers={
            SINGLE: UsageLedger((UsageEntry("single_agent", 70_000, 1_186),)),
            MULTI: UsageLedger((UsageEntry("planner", 100_000, 9_922), UsageEntry("writer", 0, 0))),
        },
        pricing=PRICING,
        energy=ENERGY,
        minutes={SINGLE: 12.5},
    )


class TestBuildReport:
    def test_columns_follow_configuration_order(self, report):
        assert report.labels == [INITIAL, SINGLE, MULTI]
        assert [c.title for c in report.configurations] == ["Initial", "Single-Agent", "Multi-Agent"]

    def test_statistics(self, report):
        stats = report.configuration(SINGLE).stats
        assert (stats.generated, stats.successful, stats.failed) == (118, 58, 60)
        assert stats.failures.assertion_share() == pytest.approx(52 / 60)

    def test_usage(self, report):
        usage = report.configuration(SINGLE).usage
        assert usage.total_tokens == 71_186
        assert usage.cost == Decimal("0.0112116")
        assert usage.energy_wh == pytest.approx(4.27116)
        assert usage.minutes == 12.5
        assert report.configuration(INITIAL).usage is None
        multi = report.configuration(MULTI)
        assert multi.stats is None
        assert multi.usage.by_role["writer"].calls == 1

    def test_generated_must_add_up(self):
        with pytest.raises(InconsistentInputs):
            build_report("x", {SINGLE: TestStats(generated=10, successful=5, failed=4)}, {}, {}, {})

    def test_failure_categories_must_partition_failures(self):
        with pytest.raises(InconsistentInputs):
            build_report("x", {SINGLE: TestStats.from_counts(5, 3, 3)}, {SINGLE: FailureBreakdown(2, 2)}, {}, {})

    def test_failures_need_statistics(self):
        with pytest.raises(InconsistentInputs):
            build_report("x", {}, {SINGLE: FailureBreakdown(1, 0)}, {}, {})


class TestRender:
    def test_markdown_cells(self, report):
        text = render_report(report, "markdown").decode("utf-8")
        assert text.startswith("# Restful-Booker\n")
        assert "| Metric | Initial | Single-Agent | Multi-Agent |" in text
        assert "| Generated | 10 | 118 | N/A |" in text
        assert "| Success rate | 100.0% | 49.2% | N/A |" in text
        assert "| Path | 25.0% (2/8) | 25.0% (2/8) | N/A |" in text
        assert "| Request Type | N/A | N/A | N/A |" in text
        assert "| Energy (Wh) | N/A | 4.27 | 6.60 |" in text
        assert "| Time (m) | N/A | 12.50 | 0.00 |" in text
        assert "| Cost | N/A | 0.01 | 0.02 |" in text
        assert "| writer | N/A | N/A | 1 calls, 0 tokens |" in text
        assert "Coverage Gain" not in text

    def test_rendering_is_deterministic(self, report):
        for format in ("json", "markdown", "csv"):
            assert render_report(report, format) == render_report(report, format)

    def test_json_round_trip(self, report):
        parsed = parse_report(render_report(report, "json"))
        assert render_report(parsed, "markdown") == render_report(report, "markdown")

    def test_csv_rows(self, report):
        rows = list(csv.reader(io.StringIO(render_report(report, "csv").decode("utf-8"))))
        assert rows[0] == ["system", "section", "metric", "configuration", "value"]
        assert ["Restful-Booker", STRUCTURAL_COVERAGE, "Path", "Initial", "25.0% (2/8)"] in rows
        assert ["Restful-Booker", LLM_USAGE, "Energy (Wh)", "Single-Agent", "4.27"] in rows
        assert len(rows) == 1 + (4 + 3 + 8 + 6) * 3

    def test_section_filter(self, report):
        text = render_report(report, "markdown", sections=[LLM_USAGE]).decode("utf-8")
        assert "## LLM Usage Statistics" in text
        assert "### Usage by Role" in text
        assert STRUCTURAL_COVERAGE not in text

    def test_unknown_format(self, report):
        with pytest.raises(ValueError):
            render_report(report, "pdf")


class TestCompare:
    def test_percentage_points(self):
        before = coverage((83, 115), *[(0, 0)] * 7)
        after = coverage((108, 115), *[(0, 0)] * 7)
        deltas = compare_configurations(before, after)
        assert deltas[Criterion.PATH].points == pytest.approx(21.739, abs=1e-3)
        assert deltas[Criterion.OPERATION].points is None
        table = render_deltas(SINGLE, MULTI, deltas)
        assert "| Path | 72.2% | 93.9% | +21.7 |" in table
        assert "| Operation | N/A | N/A | N/A |" in table

    def test_markdown_carries_the_gain(self):
        before = coverage((83, 115), *FULL_PAIRS[1:])
        after = coverage((108, 115), *FULL_PAIRS[1:])
        report = build_report("Booker", {}, {}, {SINGLE: before, MULTI: after}, {})
        text = render_report(report, "markdown").decode("utf-8")
        assert "### Coverage Gain" in text
        assert "| Criterion | Single-Agent | Multi-Agent | Delta (pp) |" in text
        assert "| Path | 72.2% | 93.9% | +21.7 |" in text
        assert "| Operation | 15.0% | 15.0% | +0.0 |" in text
        assert "Coverage Gain" not in render_report(report, "markdown", sections=[LLM_USAGE]).decode("utf-8")

    def test_denominators_must_match(self):
        with pytest.raises(DomainMismatch):
            compare_configurations(coverage(*FULL_PAIRS), coverage((2, 9), *FULL_PAIRS[1:]))


class TestBundle:
    def fill(self, bundle, booker_spec):
        copy_spec(fixture_path("restful_booker.yaml"), str(bundle))
        log = [
            make_interaction("GET", "https://automationintesting.online/api/booking/1", test_id="a"),
            make_interaction("GET", "https://automationintesting.online/api/ping", status=201, test_id="b"),
        ]
        results = [
            TestResult.passed("a", 200),
            TestResult.assertion_failed("b", Assertion(AssertionKind.STATUS_EQUALS, 200), 201, 201),
            TestResult.runtime_error("c", "connection error: refused"),
        ]
        write_results(results, "booker", results_path(str(bundle), SINGLE))
        write_log_file(log, log_path(str(bundle), SINGLE))
        save_json(UsageLedger((UsageEntry("single_agent", 1000, 200),)).to_dict(), ledger_path(str(bundle), SINGLE))
        return log

    def test_report_from_bundle(self, tmp_path, booker_spec):
        log = self.fill(tmp_path, booker_spec)
        report = report_from_bundle(str(tmp_path), PRICING, ENERGY)
        assert report.system == "Restful-Booker-Platform"
        single = report.configuration(SINGLE)
        assert single.stats == TestStats.from_counts(1, 1, 1)
        assert single.coverage == coverage_of(booker_spec, log)
        assert single.usage.total_tokens == 1200

    def test_results_need_their_log(self, tmp_path, booker_spec):
        self.fill(tmp_path, booker_spec)
        (tmp_path / "log-single.ndjson").unlink()
        with pytest.raises(InconsistentInputs):
            report_from_bundle(str(tmp_path))

    def test_bundle_needs_a_spec(self, tmp_path):
        with pytest.raises(ConfigError):
            report_from_bundle(str(tmp_path))

    def test_missing_bundle(self, tmp_path):
        with pytest.raises(ConfigError):
            report_from_bundle(str(tmp_path / "nope"))

    @pytest.mark.parametrize(
        "name, label",
        [("suite-single.json", SINGLE), ("out/suite-multi.json", MULTI), ("baseline.json", INITIAL)],
    )
    def test_labels_come_from_suite_names(self, name, label):
        assert label_for_suite(name) == label
