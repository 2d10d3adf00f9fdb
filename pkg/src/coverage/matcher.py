"""
Tolerant request-to-operation matching.

Paths are compared segment by segment: literal segments must be equal after
percent-decoding, template segments accept any non-empty segment. When more
than one template fits, the one with the fewest template segments wins; a tie
is reported as AmbiguousMatch.
"""
import re
from dataclasses import dataclass, field
from typing import Callable, Optional
from urllib.parse import unquote, urlparse

from src.errors import AmbiguousMatch
from src.openapi.model import ApiSpec, OperationDescriptor

SegmentPredicate = Callable[[str], bool]
TEMPLATE_PART = re.compile(r"\{([^{}/]+)\}")


@dataclass(frozen=True)
class MatchedInteraction:
    path: str
    method: str
    operation: Optional[OperationDescriptor]
    path_params: dict[str, str] = field(default_factory=dict)

    @property
    def operation_key(self) -> tuple[str, str]:
        return (self.path, self.method)


def split_path(path: str) -> list[str]:
    stripped = path.strip("/")
    return stripped.split("/") if stripped else []


def strip_base_path(path: str, base_path: str) -> str:
    if base_path and (path == base_path or path.startswith(base_path + "/")):
        path = path[len(base_path):]
    return path or "/"


def is_template_segment(segment: str) -> bool:
    return "{" in segment and "}" in segment


def _match_segment(template: str, concrete: str, params: dict[str, str]) -> bool:
    if not is_template_segment(template):
        return unquote(template) == concrete
    names = TEMPLATE_PART.findall(template)
    pieces = TEMPLATE_PART.split(template)
    # split() alternates literal text and captured names
    pattern = "".join(
        re.escape(unquote(piece)) if i % 2 == 0 else "([^/]+)" for i, piece in enumerate(pieces)
    )
    found = re.fullmatch(pattern, concrete)
    if not found or not concrete:
        return False
    for name, value in zip(names, found.groups()):
        params[name] = value
    return True


def match_template(
    template: str, path: str, wildcard: Optional[SegmentPredicate] = None
) -> Optional[dict[str, str]]:
    """Match one concrete path against one template; returns bound path parameters or None."""
    template_segments = split_path(template)
    concrete_segments = [unquote(s) for s in split_path(path)]
    if len(template_segments) != len(concrete_segments):
        return None
    params: dict[str, str] = {}
    for template_segment, concrete in zip(template_segments, concrete_segments):
        if wildcard is not None and concrete and wildcard(concrete):
            continue
        if not _match_segment(template_segment, concrete, params):
            return None
    return params


def template_weight(template: str) -> int:
    return sum(1 for segment in split_path(template) if is_template_segment(segment))


def match_path(
    spec: ApiSpec, path: str, wildcard: Optional[SegmentPredicate] = None
) -> Optional[tuple[str, dict[str, str]]]:
    """Resolve a concrete request path (base path included or not) to a documented template."""
    relative = strip_base_path(path, spec.base_path)
    candidates = []
    for template in spec.paths:
        params = match_template(template, relative, wildcard)
        if params is not None:
            candidates.append((template_weight(template), template, params))
    if not candidates:
        return None
    candidates.sort(key=lambda c: c[0])
    best = [c for c in candidates if c[0] == candidates[0][0]]
    if len(best) > 1:
        raise AmbiguousMatch(relative, sorted(c[1] for c in best))
    return best[0][1], best[0][2]


def match_request(spec: ApiSpec, method: str, url: str) -> Optional[MatchedInteraction]:
    path = urlparse(url).path if "://" in url else url.split("?", 1)[0]
    matched = match_path(spec, path or "/")
    if matched is None:
        return None
    template, params = matched
    method = method.upper()
    return MatchedInteraction(
        path=template,
        method=method,
        operation=spec.operation(template, method),
        path_params=params,
    )


def match_interaction(spec: ApiSpec, interaction) -> Optional[MatchedInteraction]:
    """
    Match a logged exchange to the operation it exercised.

    Returns None when no template fits. A template that fits while the method
    is undocumented yields a match whose `operation` is None.
    """
    return match_request(spec, interaction.method, interaction.url)
