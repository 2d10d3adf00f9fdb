from .bundle import (
    copy_spec,
    label_for_suite,
    ledger_path,
    log_path,
    report_from_bundle,
    results_path,
    scan_bundle,
    suite_path,
    trace_path,
    write_results,
)
from .render import ReportFormat, render_deltas, render_report
from .report import (
    INITIAL,
    MULTI,
    SINGLE,
    ConfigurationReport,
    CoverageDelta,
    RunReport,
    UsageSummary,
    build_report,
    compare_configurations,
)
