"""
Run bundle: the directory every command reads from and writes into.

    spec.<ext>                     copy of the spec document
    suite-<mode>-<slug>.json       one amplified suite per endpoint
    suite-<mode>.json              all endpoints of a mode, merged
    trace-<mode>-<slug>.json       one workflow trace per endpoint
    state-multi-<slug>.json        multi-agent blackboard per endpoint
    ledger-<mode>.json             usage of every call of a mode
    results-<label>.json           test results of one executed suite
    log-<label>.ndjson             interaction log of the same execution
    report.json|md|csv             rendered report
"""
import glob
import json
import logging
import os
import re
import shutil
from dataclasses import dataclass, field
from typing import Any, Optional

from src.coverage.engine import coverage_of
from src.errors import ConfigError, InconsistentInputs
from src.executor.log import read_log_file
from src.executor.results import TestResult, summarize_results
from src.llm.usage import EnergyModel, PricingModel, UsageLedger
from src.openapi.loader import load_spec_file
from src.reporting.report import INITIAL, RunReport, build_report
from src.utils import ensure_dir, load_json_file, parse_rfc3339, save_json, slugify

logger = logging.getLogger(__name__)

RESULTS_PATTERN = re.compile(r"^results-(?P<label>.+)\.json$")
LEDGER_PATTERN = re.compile(r"^ledger-(?P<mode>.+)\.json$")
TRACE_PATTERN = re.compile(r"^trace-(?P<mode>single|multi)-.+\.json$")


def spec_path(bundle_dir: str, extension: str) -> str:
    return os.path.join(bundle_dir, f"spec{extension}")


def suite_path(bundle_dir: str, mode: str, endpoint: Optional[str] = None) -> str:
    name = f"suite-{mode}.json" if endpoint is None else f"suite-{mode}-{slugify(endpoint)}.json"
    return os.path.join(bundle_dir, name)


def trace_path(bundle_dir: str, mode: str, endpoint: str) -> str:
    return os.path.join(bundle_dir, f"trace-{mode}-{slugify(endpoint)}.json")


def state_path(bundle_dir: str, endpoint: str) -> str:
    return os.path.join(bundle_dir, f"state-multi-{slugify(endpoint)}.json")


def ledger_path(bundle_dir: str, mode: str) -> str:
    return os.path.join(bundle_dir, f"ledger-{mode}.json")


def results_path(bundle_dir: str, label: str) -> str:
    return os.path.join(bundle_dir, f"results-{label}.json")


def log_path(bundle_dir: str, label: str) -> str:
    return os.path.join(bundle_dir, f"log-{label}.ndjson")


def report_path(bundle_dir: str, extension: str) -> str:
    return os.path.join(bundle_dir, f"report.{extension}")


def label_for_suite(suite_file: str) -> str:
    """suite-single.json -> single; anything not produced by amplify is the initial suite."""
    name = os.path.splitext(os.path.basename(suite_file))[0]
    if name.startswith("suite-"):
        return name[len("suite-") :]
    return INITIAL


def copy_spec(source: str, bundle_dir: str) -> str:
    ensure_dir(bundle_dir)
    destination = spec_path(bundle_dir, os.path.splitext(source)[1].lower() or ".json")
    if os.path.abspath(source) != os.path.abspath(destination):
        shutil.copyfile(source, destination)
    return destination


def find_spec(bundle_dir: str) -> Optional[str]:
    candidates = sorted(glob.glob(os.path.join(bundle_dir, "spec.*")))
    return candidates[0] if candidates else None


def write_results(results: list[TestResult], suite_name: str, path: str):
    save_json(
        {
            "suite": suite_name,
            "stats": summarize_results(results).to_dict(),
            "results": [r.to_dict() for r in results],
        },
        path,
    )


def read_results(path: str) -> list[TestResult]:
    try:
        data = load_json_file(path)
        return [TestResult.from_dict(item) for item in data["results"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Cannot read results file {path}: {e}") from e


def read_ledger(path: str) -> UsageLedger:
    try:
        return UsageLedger.from_dict(load_json_file(path))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Cannot read ledger file {path}: {e}") from e


@dataclass
class BundleContents:
    directory: str
    spec_file: Optional[str] = None
    results: dict[str, str] = field(default_factory=dict)
    logs: dict[str, str] = field(default_factory=dict)
    ledgers: dict[str, str] = field(default_factory=dict)
    traces: dict[str, list[str]] = field(default_factory=dict)


def scan_bundle(bundle_dir: str) -> BundleContents:
    if not os.path.isdir(bundle_dir):
        raise ConfigError(f"Bundle directory not found: {bundle_dir}")
    contents = BundleContents(bundle_dir, spec_file=find_spec(bundle_dir))
    for name in sorted(os.listdir(bundle_dir)):
        full = os.path.join(bundle_dir, name)
        if match := RESULTS_PATTERN.match(name):
            label = match.group("label")
            contents.results[label] = full
            contents.logs[label] = log_path(bundle_dir, label)
        elif match := LEDGER_PATTERN.match(name):
            contents.ledgers[match.group("mode")] = full
        elif match := TRACE_PATTERN.match(name):
            contents.traces.setdefault(match.group("mode"), []).append(full)
    return contents


def _trace_minutes(paths: list[str]) -> float:
    total = 0.0
    for path in paths:
        data: dict[str, Any] = load_json_file(path)
        if data.get("started") and data.get("finished"):
            total += (parse_rfc3339(data["finished"]) - parse_rfc3339(data["started"])).total_seconds() / 60
    return total


def report_from_bundle(
    bundle_dir: str,
    pricing: Optional[PricingModel] = None,
    energy: Optional[EnergyModel] = None,
    system: Optional[str] = None,
) -> RunReport:
    """
    Rebuild the report from the files of a bundle.

    Every results file must sit next to its log. A mode without a ledger gets
    no usage column values (N/A), which is the normal case for the initial suite.
    """
    contents = scan_bundle(bundle_dir)
    if contents.spec_file is None:
        raise ConfigError(f"No spec.* file in bundle {bundle_dir}")
    spec = load_spec_file(contents.spec_file)

    stats, coverage, ledgers, minutes = {}, {}, {}, {}
    for label, results_file in contents.results.items():
        log_file = contents.logs[label]
        if not os.path.isfile(log_file):
            raise InconsistentInputs(f"{os.path.basename(results_file)} has no matching {os.path.basename(log_file)}")
        stats[label] = summarize_results(read_results(results_file))
        coverage[label] = coverage_of(spec, read_log_file(log_file))
    for mode, ledger_file in contents.ledgers.items():
        ledgers[mode] = read_ledger(ledger_file)
        if contents.traces.get(mode):
            minutes[mode] = _trace_minutes(contents.traces[mode])
    if not ledgers:
        logger.warning("Bundle %s has no ledgers; usage statistics are not applicable", bundle_dir)

    return build_report(
        system or spec.title,
        stats,
        {label: s.failures for label, s in stats.items()},
        coverage,
        ledgers,
        pricing,
        energy,
        minutes,
    )
