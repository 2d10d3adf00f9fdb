import re
from typing import Mapping

# <Access Token Here>: a value a human still has to supply.
HUMAN_PLACEHOLDER = re.compile(r"<[A-Za-z][^<>\n]*>")
# ${petId}: resolved from target variables at execution time.
VARIABLE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_.-]*)\}")

MARKUP_MEDIA_TYPES = ("application/xml", "text/xml", "text/html")


def find_placeholders(text: str) -> list[str]:
    return HUMAN_PLACEHOLDER.findall(text or "")


def find_variables(text: str) -> list[str]:
    return VARIABLE.findall(text or "")


def substitute_variables(text: str, variables: Mapping[str, str]) -> str:
    """Replace every ${name}; raises KeyError naming the first unbound variable."""
    return VARIABLE.sub(lambda m: str(variables[m.group(1)]), text)


def is_symbolic_segment(segment: str) -> bool:
    return bool(VARIABLE.search(segment) or HUMAN_PLACEHOLDER.search(segment))


def is_markup(media_type: str) -> bool:
    return bool(media_type) and (media_type in MARKUP_MEDIA_TYPES or media_type.endswith("+xml"))
