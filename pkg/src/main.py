import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field, replace
from typing import Any, Optional

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.agents import WORKFLOWS, AgentLimits, PromptLibrary
from src.config import load_environment, read_config_file, resolve_relative, section
from src.coverage import coverage_of
from src.errors import AmplifierError, ConfigError, PreconditionFailed, WorkflowError
from src.executor import TargetConfig, execute_suite, format_console, read_log_file, summarize_results, write_log_file
from src.llm import BackendConfig, EnergyModel, PricingModel, UsageLedger, create_backend, merge_ledgers
from src.openapi import load_spec_file
from src.reporting import build_report, copy_spec, label_for_suite, render_report, report_from_bundle
from src.reporting.bundle import (
    ledger_path,
    log_path,
    report_path,
    results_path,
    state_path,
    suite_path,
    trace_path,
    write_results,
)
from src.reporting.render import STRUCTURAL_COVERAGE, ReportFormat
from src.stub import StubConfig, serve
from src.suite import merge_suites, read_suite_file, render_suite
from src.utils import FixedClock, SystemClock, save_bytes, save_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_WORKFLOW = 2

ALL_ENDPOINTS = "ALL"
PATH_KEYS = ("spec", "backend", "baseline", "out", "target", "prompt_dir")
REPORT_EXTENSIONS = {ReportFormat.JSON: "json", ReportFormat.MARKDOWN: "md", ReportFormat.CSV: "csv"}


# ----------------------------------------------------------
# Run configuration
# ----------------------------------------------------------
@dataclass(frozen=True)
class RunConfig:
    """Everything one `amplify` run needs. Built from a run file, then CLI flags."""

    spec_path: str
    mode: str
    backend_path: str
    baseline_path: str
    output_dir: str
    endpoints: Any = ALL_ENDPOINTS
    target_path: Optional[str] = None
    use_stub: bool = False
    limits: AgentLimits = field(default_factory=AgentLimits)
    jobs: int = 1
    prompt_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        missing = [key for key in ("spec", "mode", "backend", "baseline", "out") if not data.get(key)]
        if missing:
            raise ConfigError(f"Run config is missing: {', '.join(missing)}")
        mode = data["mode"]
        if mode not in WORKFLOWS:
            raise ConfigError(f"mode must be one of {', '.join(WORKFLOWS)}, got {mode!r}")
        endpoints = data.get("endpoints", ALL_ENDPOINTS)
        if endpoints != ALL_ENDPOINTS and not (isinstance(endpoints, list) and endpoints):
            raise ConfigError("endpoints must be ALL or a non-empty list of paths")
        try:
            jobs = int(data.get("jobs", 1))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"jobs must be an integer: {e}") from e
        if jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return cls(
            spec_path=data.get("spec"),
            mode=mode,
            backend_path=data.get("backend"),
            baseline_path=data.get("baseline"),
            output_dir=data.get("out"),
            endpoints=endpoints,
            target_path=data.get("target"),
            use_stub=bool(data.get("stub", False)),
            limits=AgentLimits.from_dict(data.get("limits")),
            jobs=jobs,
            prompt_dir=data.get("prompt_dir") or section("agents").get("prompt_dir"),
        )

    def resolve_endpoints(self, spec) -> list[str]:
        if self.endpoints == ALL_ENDPOINTS:
            return list(spec.paths)
        unknown = [e for e in self.endpoints if e not in spec.paths]
        if unknown:
            raise ConfigError(f"Endpoints not in the spec: {', '.join(unknown)}")
        return list(self.endpoints)


def _run_config(args: argparse.Namespace) -> RunConfig:
    data: dict[str, Any] = {}
    if args.config:
        data = {
            key: resolve_relative(value, args.config) if key in PATH_KEYS and isinstance(value, str) else value
            for key, value in read_config_file(args.config).items()
        }
    return RunConfig.from_dict({**data, **_flag_values(args)})


def _flag_values(args: argparse.Namespace) -> dict[str, Any]:
    values = {
        "spec": args.spec,
        "mode": args.mode,
        "backend": args.backend,
        "baseline": args.baseline,
        "out": args.out,
        "target": args.target,
        "jobs": args.jobs,
    }
    if args.endpoint:
        values["endpoints"] = ALL_ENDPOINTS if args.endpoint == [ALL_ENDPOINTS] else args.endpoint
    if args.stub:
        values["stub"] = True
    return {k: v for k, v in values.items() if v is not None}


def _clock(args: argparse.Namespace):
    return FixedClock() if args.fixed_clock else SystemClock()


def _require_file(path: Optional[str], what: str) -> str:
    if not path or not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


# ----------------------------------------------------------
# amplify
# ----------------------------------------------------------
@dataclass
class EndpointOutcome:
    endpoint: str
    suite: Any = None
    ledger: UsageLedger = field(default_factory=UsageLedger)
    trace: Any = None
    state: Any = None
    error: Optional[WorkflowError] = None


def _amplify_endpoint(run: RunConfig, spec, endpoint, baseline, backend_config, templates, target, clock, idx, total):
    logger.info("[%d/%d] --- Amplifying %s (%s) ---", idx, total, endpoint, run.mode)
    workflow = WORKFLOWS[run.mode]
    backend = create_backend(backend_config, endpoint)
    try:
        result = workflow(spec, endpoint, baseline, backend, run.limits, target, templates, clock)
    except WorkflowError as e:
        logger.error("[%d/%d] %s failed: %s", idx, total, endpoint, e)
        return EndpointOutcome(
            endpoint,
            ledger=e.partial_ledger or UsageLedger(),
            trace=e.partial_trace,
            state=e.partial_state,
            error=e,
        )
    logger.info("[%d/%d] %s: %d test(s)", idx, total, endpoint, len(result.suite))
    return EndpointOutcome(endpoint, result.suite, result.ledger, result.trace, getattr(result, "state", None))


def cmd_amplify(args: argparse.Namespace) -> int:
    run = _run_config(args)
    _require_file(run.spec_path, "Spec file")
    _require_file(run.backend_path, "Backend config")
    _require_file(run.baseline_path, "Baseline suite")

    spec = load_spec_file(run.spec_path)
    endpoints = run.resolve_endpoints(spec)
    baseline = read_suite_file(run.baseline_path)
    backend_config = BackendConfig.from_file(run.backend_path)
    for endpoint in endpoints:
        create_backend(backend_config, endpoint)
    templates = PromptLibrary.load(run.prompt_dir)
    clock = _clock(args)

    target = TargetConfig.from_file(run.target_path) if run.target_path else None
    live = target is not None or run.use_stub
    if args.execute and not live:
        raise ConfigError("--execute needs --target or --stub")
    if section("agents").get("execute_in_tool", False) and not live:
        logger.warning("agents.execute_in_tool is set but no target or stub was given; the executor tool runs dry")

    with ExitStack() as stack:
        if run.use_stub:
            stub = stack.enter_context(serve(StubConfig.from_dict(spec, {"port": 0}), clock))
            target = target.with_base_url(stub.base_url()) if target else TargetConfig(base_url=stub.base_url())

        copy_spec(run.spec_path, run.output_dir)
        save_bytes(render_suite(baseline), suite_path(run.output_dir, "initial"))

        total = len(endpoints)
        jobs = [
            (run, spec, endpoint, baseline, backend_config, templates, target, clock, idx, total)
            for idx, endpoint in enumerate(endpoints, start=1)
        ]
        if run.jobs > 1:
            with ThreadPoolExecutor(max_workers=run.jobs) as pool:
                outcomes = list(pool.map(lambda job: _amplify_endpoint(*job), jobs))
        else:
            outcomes = [_amplify_endpoint(*job) for job in jobs]

    for outcome in outcomes:
        if outcome.suite is not None:
            save_bytes(render_suite(outcome.suite), suite_path(run.output_dir, run.mode, outcome.endpoint))
        if outcome.trace is not None:
            save_json(outcome.trace.to_dict(), trace_path(run.output_dir, run.mode, outcome.endpoint))
        if outcome.state is not None:
            save_json(outcome.state.to_dict(), state_path(run.output_dir, outcome.endpoint))

    suites = [o.suite for o in outcomes if o.suite is not None]
    if suites:
        merged = merge_suites(f"{spec.title} ({run.mode})", suites)
        save_bytes(render_suite(merged), suite_path(run.output_dir, run.mode))
    save_json(merge_ledgers(o.ledger for o in outcomes).to_dict(), ledger_path(run.output_dir, run.mode))

    failed = [o for o in outcomes if o.error is not None]
    if failed:
        logger.error("%d of %d endpoint(s) failed; partial bundle kept in %s", len(failed), total, run.output_dir)
        return EXIT_WORKFLOW
    logger.info("=== Amplification finished: %d suite(s) in %s ===", len(suites), run.output_dir)
    return EXIT_OK


# ----------------------------------------------------------
# exec
# ----------------------------------------------------------
def cmd_exec(args: argparse.Namespace) -> int:
    suite = read_suite_file(_require_file(args.suite, "Suite file"))
    label = args.label or label_for_suite(args.suite)
    clock = _clock(args)
    spec = load_spec_file(_require_file(args.spec, "Spec file")) if args.spec else None
    target = TargetConfig.from_file(args.target) if args.target else None
    if target is None and not args.stub:
        raise ConfigError("exec needs --target or --stub")
    if args.stub and spec is None:
        raise ConfigError("--stub needs --spec")

    with ExitStack() as stack:
        if args.stub:
            stub_config = (
                StubConfig.from_file(spec, args.overrides) if args.overrides else StubConfig.from_dict(spec, {})
            )
            stub = stack.enter_context(serve(stub_config.with_port(args.stub_port), clock))
            target = target.with_base_url(stub.base_url()) if target else TargetConfig(base_url=stub.base_url())
        try:
            results, log = execute_suite(suite, target, clock=clock)
        except PreconditionFailed as e:
            for issue in e.issues:
                logger.error("%s", issue)
            raise

    if spec is not None:
        copy_spec(args.spec, args.out)
    write_results(results, suite.name, results_path(args.out, label))
    write_log_file(log, log_path(args.out, label))
    sys.stdout.write(format_console(results))
    stats = summarize_results(results)
    logger.info("=== %s: %d/%d passed ===", label, stats.successful, stats.generated)
    return EXIT_OK


# ----------------------------------------------------------
# coverage
# ----------------------------------------------------------
def _log_label(path: str, position: int) -> str:
    name = os.path.splitext(os.path.basename(path))[0]
    if name.startswith("log-"):
        return name[len("log-") :]
    return name or f"log{position}"


def cmd_coverage(args: argparse.Namespace) -> int:
    spec = load_spec_file(_require_file(args.spec, "Spec file"))
    labels = args.labels.split(",") if args.labels else [_log_label(p, i) for i, p in enumerate(args.log, start=1)]
    if len(labels) != len(args.log):
        raise ConfigError("--labels needs one label per log")
    if len(set(labels)) != len(labels):
        raise ConfigError(f"Duplicate column labels: {', '.join(labels)}")

    coverage = {}
    for label, path in zip(labels, args.log):
        coverage[label] = coverage_of(spec, read_log_file(_require_file(path, "Log file")))
    report = build_report(spec.title, {}, {}, coverage, {})
    # Columns keep the order the logs were given in.
    report = replace(report, configurations=tuple(report.configuration(label) for label in labels))
    content = render_report(report, args.format, sections=[STRUCTURAL_COVERAGE])
    if args.out:
        save_bytes(content, args.out)
        logger.info("Coverage report written to %s", args.out)
    else:
        sys.stdout.write(content.decode("utf-8"))
    return EXIT_OK


# ----------------------------------------------------------
# stub
# ----------------------------------------------------------
def cmd_stub(args: argparse.Namespace) -> int:
    spec = load_spec_file(_require_file(args.spec, "Spec file"))
    config = StubConfig.from_file(spec, args.overrides) if args.overrides else StubConfig.from_dict(spec, {})
    if args.port is not None:
        config = config.with_port(args.port)
    if args.host:
        config = replace(config, host=args.host)
    server = serve(config, _clock(args))
    print(f"Stub server listening on {server.url} (port {server.port})", flush=True)
    server.wait()
    return EXIT_OK


# ----------------------------------------------------------
# report
# ----------------------------------------------------------
def _pricing(path: Optional[str]) -> tuple[PricingModel, EnergyModel]:
    defaults = section("llm")
    data = read_config_file(path) if path else {}
    pricing = PricingModel.from_dict(data.get("pricing", data) if path else defaults.get("pricing"))
    energy = EnergyModel.from_value(data.get("energy_wh_per_token", defaults.get("energy_wh_per_token", 0.00006)))
    return pricing, energy


def cmd_report(args: argparse.Namespace) -> int:
    pricing, energy = _pricing(args.pricing)
    report = report_from_bundle(args.bundle, pricing, energy, args.system)
    formats = list(ReportFormat) if args.format == "all" else [ReportFormat(args.format)]
    for fmt in formats:
        path = report_path(args.bundle, REPORT_EXTENSIONS[fmt])
        save_bytes(render_report(report, fmt), path)
        logger.info("Report written to %s", path)
    return EXIT_OK


# ----------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="restamp", description="REST API test amplification workbench")
    parser.add_argument("--fixed-clock", action="store_true", help="Freeze timestamps for reproducible bundles")
    parser.add_argument("--log-level", default=None, help="Overrides logging.level from config.json")
    commands = parser.add_subparsers(dest="command", required=True)

    amplify = commands.add_parser("amplify", help="Amplify a baseline suite with the single- or multi-agent workflow")
    amplify.add_argument("--config", help="Run config JSON; flags override its values")
    amplify.add_argument("--spec")
    amplify.add_argument("--mode", choices=sorted(WORKFLOWS))
    amplify.add_argument("--endpoint", action="append", help="Endpoint path; repeat, or ALL (default)")
    amplify.add_argument("--backend", help="Backend config JSON")
    amplify.add_argument("--baseline", help="Baseline suite JSON")
    amplify.add_argument("--target", help="Target config JSON for live execution inside the agents' tool")
    amplify.add_argument("--stub", action="store_true", help="Execute against an in-process stub of the spec")
    amplify.add_argument("--execute", action="store_true", help="Require live execution; fails without --target or --stub")
    amplify.add_argument("--jobs", type=int, help="Endpoints amplified concurrently")
    amplify.add_argument("--out", help="Bundle directory")
    amplify.set_defaults(handler=cmd_amplify)

    exec_ = commands.add_parser("exec", help="Execute a suite and write results and an interaction log")
    exec_.add_argument("--suite", required=True)
    exec_.add_argument("--target", help="Target config JSON")
    exec_.add_argument("--spec", help="Spec file (required with --stub; copied into the bundle)")
    exec_.add_argument("--stub", action="store_true", help="Serve the spec in-process and target it")
    exec_.add_argument("--stub-port", type=int, default=0)
    exec_.add_argument("--overrides", help="Stub overrides JSON")
    exec_.add_argument("--label", help="Configuration label (default: from the suite file name)")
    exec_.add_argument("--out", required=True, help="Bundle directory")
    exec_.set_defaults(handler=cmd_exec)

    coverage = commands.add_parser("coverage", help="Structural coverage of one or more interaction logs")
    coverage.add_argument("--spec", required=True)
    coverage.add_argument("--log", action="append", required=True, help="NDJSON log; repeat for more columns")
    coverage.add_argument("--labels", help="Comma-separated column labels")
    coverage.add_argument("--format", choices=[f.value for f in ReportFormat], default=ReportFormat.MARKDOWN.value)
    coverage.add_argument("--out", help="Output file (default: stdout)")
    coverage.set_defaults(handler=cmd_coverage)

    stub = commands.add_parser("stub", help="Serve a spec-driven mock API")
    stub.add_argument("--spec", required=True)
    stub.add_argument("--port", type=int)
    stub.add_argument("--host")
    stub.add_argument("--overrides", help="Overrides JSON")
    stub.set_defaults(handler=cmd_stub)

    report = commands.add_parser("report", help="Render the report of a run bundle")
    report.add_argument("--bundle", required=True)
    report.add_argument("--pricing", help="Pricing JSON: input_per_million, output_per_million, energy_wh_per_token")
    report.add_argument("--format", choices=[*(f.value for f in ReportFormat), "all"], default="all")
    report.add_argument("--system", help="System name (default: the spec title)")
    report.set_defaults(handler=cmd_report)
    return parser


# ----------------------------------------------------------
# Main workflow
# ----------------------------------------------------------
def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging_settings = section("logging")
    logging.basicConfig(
        level=(args.log_level or logging_settings.get("level", "INFO")).upper(),
        format=logging_settings.get("format", "%(asctime)s %(levelname)s %(message)s"),
    )
    load_environment()

    try:
        return args.handler(args)
    except WorkflowError as e:
        logger.error("Workflow aborted: %s", e)
        return EXIT_WORKFLOW
    except (AmplifierError, OSError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
