"""
Plain-text reference rendering for agents.

Output is stable across runs so that scripted-backend tests can compare it
byte for byte. Endpoint queries start with "/", schema queries with an
uppercase letter.
"""
import json

from src.errors import UnknownReference
from src.openapi.loader import strip_schema_prefix
from src.openapi.model import ApiSpec, OperationDescriptor

ReferenceText = str


def _render_operation(operation: OperationDescriptor) -> list[str]:
    lines = [f"  {operation.method}"]
    if operation.operation_id:
        lines.append(f"    Operation id: {operation.operation_id}")
    if operation.summary:
        lines.append(f"    Summary: {operation.summary}")

    if operation.parameters:
        lines.append("    Parameters:")
        for parameter in operation.parameters:
            flags = [parameter.location.value, "required" if parameter.required else "optional"]
            if parameter.type_name:
                flags.append(parameter.type_name)
            line = f"      - {parameter.name} ({', '.join(flags)})"
            if parameter.enum_values:
                line += f" values: [{', '.join(parameter.enum_values)}]"
            if parameter.description:
                line += f": {parameter.description}"
            lines.append(line)
    else:
        lines.append("    Parameters: none")

    if operation.request_types:
        requirement = "required" if operation.body_required else "optional"
        schema = f"; schema: {operation.request_schema}" if operation.request_schema else ""
        lines.append(f"    Request body ({requirement}): {', '.join(sorted(operation.request_types))}{schema}")

    lines.append("    Responses:")
    for response in operation.documented_responses:
        media = ", ".join(sorted(response.media_types)) or "no content"
        schema = f"; schema: {response.schema}" if response.schema else ""
        description = f" - {response.description}" if response.description else ""
        lines.append(f"      {response.status}{description} [{media}{schema}]")
    return lines


def _render_endpoint(spec: ApiSpec, path: str) -> ReferenceText:
    operations = spec.operations_for(path)
    lines = [f"Endpoint {path}"]
    referenced: set[str] = set()
    for operation in operations:
        lines.extend(_render_operation(operation))
        referenced.update(operation.referenced_schemas)
    lines.append(f"Referenced schemas: {', '.join(sorted(referenced)) or 'none'}")
    return "\n".join(lines) + "\n"


def _render_schema(spec: ApiSpec, name: str) -> ReferenceText:
    body = json.dumps(spec.schemas[name], indent=2, sort_keys=True, ensure_ascii=False)
    refs = spec.schema_refs.get(name, ())
    return f"Schema {name}\n{body}\nReferenced schemas: {', '.join(refs) or 'none'}\n"


def _unknown_message(spec: ApiSpec, query: str) -> ReferenceText:
    return (
        f"Unknown reference '{query}'.\n"
        f"Valid endpoints: {', '.join(spec.paths) or 'none'}\n"
        f"Valid schemas: {', '.join(sorted(spec.schemas)) or 'none'}\n"
    )


def retrieve(spec: ApiSpec, query: str) -> ReferenceText:
    """
    Answer one retriever query.

    Unknown references come back as a descriptive message rather than an
    exception so that an agent can correct its next query.
    """
    query = query.strip()
    if query.startswith("/"):
        path = query.split("?", 1)[0]
        if len(path) > 1:
            path = path.rstrip("/")
        if path in spec.paths:
            return _render_endpoint(spec, path)
        return _unknown_message(spec, query)
    try:
        return resolve_schema(spec, query, recursive=False)
    except UnknownReference:
        return _unknown_message(spec, query)


def resolve_schema(spec: ApiSpec, name: str, recursive: bool = False) -> ReferenceText:
    name = strip_schema_prefix(name.strip())
    if name not in spec.schemas:
        raise UnknownReference(f"No schema named {name!r}")
    if not recursive:
        return _render_schema(spec, name)

    # Breadth-first closure; each schema emitted once even on cycles.
    ordered: list[str] = []
    pending = [name]
    seen: set[str] = set()
    while pending:
        current = pending.pop(0)
        if current in seen or current not in spec.schemas:
            continue
        seen.add(current)
        ordered.append(current)
        pending.extend(r for r in spec.schema_refs.get(current, ()) if r not in seen)
    return "\n".join(_render_schema(spec, n) for n in ordered)
