import logging
from dataclasses import fields
from http.cookies import CookieError, SimpleCookie
from typing import TYPE_CHECKING, Iterable
from urllib.parse import parse_qsl, urlparse

from src.coverage.domains import enumerate_coverage_domains
from src.coverage.matcher import match_interaction, strip_base_path
from src.coverage.model import (
    Criterion,
    CoverageDomains,
    CoverageObservations,
    CoverageReport,
    CoverageSets,
    CriterionResult,
)
from src.errors import AmbiguousMatch, DomainMismatch
from src.openapi.model import ApiSpec, ParameterLocation
from src.utils import normalize_media_type, status_class

if TYPE_CHECKING:
    from src.executor.log import Interaction

logger = logging.getLogger(__name__)


class _Collector:
    def __init__(self):
        self.sets: dict[str, set] = {f.name: set() for f in fields(CoverageSets)}

    def add(self, criterion: Criterion, item):
        self.sets[criterion.value].add(item)

    def freeze(self) -> CoverageSets:
        return CoverageSets(**{name: frozenset(items) for name, items in self.sets.items()})


def _cookie_names(header_value: str) -> dict[str, str]:
    cookie = SimpleCookie()
    try:
        cookie.load(header_value)
    except CookieError:
        return {}
    return {name: morsel.value for name, morsel in cookie.items()}


def _record_interaction(spec: ApiSpec, interaction: "Interaction", collector: _Collector):
    try:
        matched = match_interaction(spec, interaction)
    except AmbiguousMatch as e:
        logger.warning("Ambiguous log entry %s %s: %s", interaction.method, interaction.url, e)
        matched = None

    if matched is None:
        path = strip_base_path(urlparse(interaction.url).path or "/", spec.base_path)
        op = (path, interaction.method.upper())
        collector.add(Criterion.PATH, path)
    else:
        op = matched.operation_key
        collector.add(Criterion.PATH, matched.path)
    collector.add(Criterion.OPERATION, op)

    collector.add(Criterion.STATUS, (op, interaction.status))
    collector.add(Criterion.STATUS_CLASS, (op, status_class(interaction.status)))
    response_type = normalize_media_type(interaction.response_media_type)
    if response_type:
        collector.add(Criterion.RESPONSE_TYPE, (op, response_type))
    request_type = normalize_media_type(interaction.request_media_type)
    if request_type and interaction.request_body.present:
        collector.add(Criterion.REQUEST_TYPE, (op, request_type))

    sent: list[tuple[tuple[str, str], str]] = []
    query = parse_qsl(urlparse(interaction.url).query, keep_blank_values=True)
    sent.extend(((name, ParameterLocation.QUERY.value), value) for name, value in query)
    cookie_header = interaction.header("Cookie")
    if cookie_header:
        sent.extend(
            ((name, ParameterLocation.COOKIE.value), value) for name, value in _cookie_names(cookie_header).items()
        )

    operation = matched.operation if matched else None
    if operation is not None:
        for parameter in operation.parameters:
            if parameter.location == ParameterLocation.HEADER:
                value = interaction.header(parameter.name)
                if value is not None:
                    sent.append((parameter.key, value))
            elif parameter.location == ParameterLocation.PATH:
                sent.append((parameter.key, matched.path_params.get(parameter.name, "")))

    for key, value in sent:
        collector.add(Criterion.PARAMETER, (op, key))
        if operation is None:
            continue
        documented = next((p for p in operation.parameters if p.key == key), None)
        if documented is not None and documented.enum_values and value in documented.enum_values:
            collector.add(Criterion.PARAMETER_VALUE, (op, key, value))


def _split(observed: CoverageSets, domains: CoverageDomains) -> CoverageObservations:
    documented = {}
    undocumented = {}
    for criterion in Criterion:
        items = observed.get(criterion)
        domain = domains.get(criterion)
        documented[criterion.value] = items & domain
        undocumented[criterion.value] = items - domain
    return CoverageObservations(documented=CoverageSets(**documented), undocumented=CoverageSets(**undocumented))


def observe(log: Iterable["Interaction"], spec: ApiSpec) -> CoverageObservations:
    """
    Record every structural element the log exercised.

    Elements the spec documents land on the documented side; everything else
    (unmatched paths, undocumented methods, statuses or media types) lands on
    the undocumented side and never counts toward a ratio.
    """
    collector = _Collector()
    for interaction in log:
        _record_interaction(spec, interaction, collector)
    observations = _split(collector.freeze(), enumerate_coverage_domains(spec))

    undocumented_ops = len(observations.undocumented.operations)
    total_ops = undocumented_ops + len(observations.documented.operations)
    if total_ops and undocumented_ops * 2 > total_ops:
        logger.warning(
            "%d of %d observed operations are not documented in %r; is the log from another API?",
            undocumented_ops,
            total_ops,
            spec.title,
        )
    return observations


def compute_report(domains: CoverageDomains, observations: CoverageObservations) -> CoverageReport:
    results = []
    for criterion in Criterion:
        documented = observations.documented.get(criterion)
        domain = domains.get(criterion)
        if not documented <= domain:
            extra = sorted(map(str, documented - domain))[:3]
            raise DomainMismatch(f"{criterion.label} observations outside the domain: {', '.join(extra)}")
        results.append(CriterionResult(criterion, len(documented), len(domain)))
    return CoverageReport(results=tuple(results), undocumented=observations.undocumented)


def coverage_of(spec: ApiSpec, log: Iterable["Interaction"]) -> CoverageReport:
    return compute_report(enumerate_coverage_domains(spec), observe(log, spec))
