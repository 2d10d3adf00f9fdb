import copy
import json
import logging
import os
import re
from types import MappingProxyType
from typing import Any, Optional
from urllib.parse import urlparse

import yaml

from src.errors import DuplicateOperation, MalformedDocument, UnsupportedDialect
from src.openapi.model import (
    HTTP_METHODS,
    ApiSpec,
    Dialect,
    OperationDescriptor,
    ParameterDescriptor,
    ParameterLocation,
    ResponseDescriptor,
)
from src.utils import normalize_media_type

logger = logging.getLogger(__name__)

SCHEMA_REF_PREFIXES = ("#/components/schemas/", "#/definitions/")
TEMPLATE_NAME = re.compile(r"\{([^{}/]+)\}")
FORM_TYPES = ("application/x-www-form-urlencoded", "multipart/form-data")


def strip_schema_prefix(name: str) -> str:
    for prefix in SCHEMA_REF_PREFIXES:
        if name.startswith(prefix):
            return name[len(prefix):]
    return name


def normalize_path(path: str) -> str:
    path = "/" + str(path).strip().lstrip("/")
    if len(path) > 1:
        path = path.rstrip("/")
    return path


def template_names(path: str) -> list[str]:
    return TEMPLATE_NAME.findall(path)


def _literal(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


# ----------------------------------------------------------
# Document parsing
# ----------------------------------------------------------
def parse_document(document: bytes, format_hint: Optional[str] = None) -> dict[str, Any]:
    try:
        text = document.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise MalformedDocument(f"Document is not UTF-8: {e}") from e

    data: Any = None
    if format_hint == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise MalformedDocument(f"Invalid JSON: {e}") from e
    elif format_hint == "yaml":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise MalformedDocument(f"Invalid YAML: {e}") from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            try:
                data = yaml.safe_load(text)
            except yaml.YAMLError as e:
                raise MalformedDocument(f"Document is neither JSON nor YAML: {e}") from e

    if not isinstance(data, dict):
        raise MalformedDocument("OpenAPI document must be a mapping at the top level")
    return data


def detect_dialect(data: dict[str, Any]) -> Dialect:
    if str(data.get("swagger", "")).startswith("2"):
        return Dialect.V2
    if str(data.get("openapi", "")).startswith("3"):
        return Dialect.V3
    raise UnsupportedDialect(
        f"Unsupported dialect: swagger={data.get('swagger')!r} openapi={data.get('openapi')!r}"
    )


# ----------------------------------------------------------
# Reference handling
# ----------------------------------------------------------
class _Resolver:
    def __init__(self, document: dict[str, Any]):
        self.document = document

    def lookup(self, ref: str) -> Any:
        if not ref.startswith("#/"):
            raise MalformedDocument(f"Only local references are supported: {ref}")
        node: Any = self.document
        for token in ref[2:].split("/"):
            token = token.replace("~1", "/").replace("~0", "~")
            if not isinstance(node, dict) or token not in node:
                raise MalformedDocument(f"Dangling reference: {ref}")
            node = node[token]
        return node

    def resolve(self, node: Any) -> Any:
        """Follow a chain of non-schema $refs (parameters, responses, requestBodies)."""
        seen: set[str] = set()
        while isinstance(node, dict) and "$ref" in node:
            ref = node["$ref"]
            if ref in seen:
                raise MalformedDocument(f"Reference cycle at {ref}")
            seen.add(ref)
            node = self.lookup(ref)
        return node

    def schema_refs(self, node: Any, _seen: Optional[set[int]] = None) -> set[str]:
        """Bare schema names referenced anywhere below node, following component refs."""
        seen = _seen if _seen is not None else set()
        found: set[str] = set()
        if id(node) in seen:
            return found
        seen.add(id(node))
        if isinstance(node, dict):
            ref = node.get("$ref")
            if isinstance(ref, str):
                if ref.startswith(SCHEMA_REF_PREFIXES):
                    found.add(strip_schema_prefix(ref))
                else:
                    try:
                        found |= self.schema_refs(self.lookup(ref), seen)
                    except MalformedDocument:
                        pass
            for key, value in node.items():
                if key != "$ref":
                    found |= self.schema_refs(value, seen)
        elif isinstance(node, list):
            for item in node:
                found |= self.schema_refs(item, seen)
        return found


def _bare_refs(node: Any) -> Any:
    """Copy of a schema with every schema $ref rewritten to its bare name."""
    if isinstance(node, dict):
        copied = {}
        for key, value in node.items():
            if key.startswith("x-"):
                continue
            if key == "$ref" and isinstance(value, str):
                copied[key] = strip_schema_prefix(value)
            else:
                copied[key] = _bare_refs(value)
        return copied
    if isinstance(node, list):
        return [_bare_refs(item) for item in node]
    return copy.deepcopy(node)


def describe_schema(schema: Any, resolver: _Resolver) -> str:
    if not isinstance(schema, dict) or not schema:
        return ""
    ref = schema.get("$ref")
    if isinstance(ref, str):
        if ref.startswith(SCHEMA_REF_PREFIXES):
            return strip_schema_prefix(ref)
        return describe_schema(resolver.resolve(schema), resolver)
    if schema.get("type") == "array":
        inner = describe_schema(schema.get("items", {}), resolver)
        return f"array of {inner}" if inner else "array"
    if "type" in schema:
        fmt = schema.get("format")
        return f"{schema['type']} ({fmt})" if fmt else str(schema["type"])
    return "object"


# ----------------------------------------------------------
# Dialect-specific extraction
# ----------------------------------------------------------
class _Normalizer:
    def __init__(self, data: dict[str, Any], dialect: Dialect):
        self.data = data
        self.dialect = dialect
        self.resolver = _Resolver(data)

    # -- parameters -----------------------------------------------------
    def _enum_values(self, parameter: dict[str, Any]) -> Optional[tuple[str, ...]]:
        if self.dialect == Dialect.V3:
            schema = self.resolver.resolve(parameter.get("schema", {})) or {}
        else:
            schema = parameter
        items = self.resolver.resolve(schema.get("items", {})) or {}
        enum = schema.get("enum") or (items.get("enum") if isinstance(items, dict) else None)
        if enum:
            return tuple(sorted({_literal(v) for v in enum}))
        if schema.get("type") == "boolean" or (isinstance(items, dict) and items.get("type") == "boolean"):
            return ("false", "true")
        return None

    def _type_name(self, parameter: dict[str, Any]) -> str:
        schema = parameter.get("schema", {}) if self.dialect == Dialect.V3 else parameter
        return describe_schema(schema, self.resolver)

    def _merged_parameters(self, path_item: dict[str, Any], operation: dict[str, Any]) -> list[dict[str, Any]]:
        merged: dict[tuple[str, str], dict[str, Any]] = {}
        for raw in list(path_item.get("parameters", [])) + list(operation.get("parameters", [])):
            parameter = self.resolver.resolve(raw)
            if not isinstance(parameter, dict) or "name" not in parameter or "in" not in parameter:
                raise MalformedDocument(f"Parameter without name/in: {raw!r}")
            merged[(str(parameter["name"]), str(parameter["in"]))] = parameter
        return list(merged.values())

    def _parameters(self, path: str, raw_parameters: list[dict[str, Any]]) -> tuple[ParameterDescriptor, ...]:
        descriptors: dict[tuple[str, str], ParameterDescriptor] = {}
        for parameter in raw_parameters:
            location = parameter["in"]
            if location not in {loc.value for loc in ParameterLocation}:
                continue
            loc = ParameterLocation(location)
            descriptor = ParameterDescriptor(
                name=str(parameter["name"]),
                location=loc,
                required=True if loc == ParameterLocation.PATH else bool(parameter.get("required", False)),
                enum_values=self._enum_values(parameter),
                description=str(parameter.get("description", "")).strip(),
                type_name=self._type_name(parameter),
            )
            descriptors[descriptor.key] = descriptor

        for name in template_names(path):
            if (name, ParameterLocation.PATH.value) not in descriptors:
                descriptors[(name, ParameterLocation.PATH.value)] = ParameterDescriptor(
                    name=name, location=ParameterLocation.PATH, required=True, type_name="string"
                )

        order = {loc: i for i, loc in enumerate(ParameterLocation)}
        return tuple(sorted(descriptors.values(), key=lambda p: (order[p.location], p.name)))

    # -- request / responses ---------------------------------------------
    def _request_v3(self, operation: dict[str, Any]) -> tuple[frozenset[str], bool, str]:
        body = self.resolver.resolve(operation.get("requestBody"))
        if not isinstance(body, dict):
            return frozenset(), False, ""
        content = body.get("content", {}) or {}
        types = frozenset(filter(None, (normalize_media_type(str(t)) for t in content)))
        return types, bool(body.get("required", False)), self._content_schema(content)

    def _request_v2(self, operation: dict[str, Any], raw_parameters: list[dict[str, Any]]) -> tuple[frozenset[str], bool, str]:
        consumes = operation.get("consumes", self.data.get("consumes", [])) or []
        body_params = [p for p in raw_parameters if p.get("in") == "body"]
        form_params = [p for p in raw_parameters if p.get("in") == "formData"]
        if body_params:
            types = consumes or ["application/json"]
            return (
                frozenset(filter(None, (normalize_media_type(t) for t in types))),
                bool(body_params[0].get("required", False)),
                describe_schema(body_params[0].get("schema", {}), self.resolver),
            )
        if form_params:
            types = [t for t in consumes if normalize_media_type(t) in FORM_TYPES] or [FORM_TYPES[0]]
            return (
                frozenset(filter(None, (normalize_media_type(t) for t in types))),
                any(p.get("required", False) for p in form_params),
                "form",
            )
        return frozenset(), False, ""

    def _content_schema(self, content: dict[str, Any]) -> str:
        if not content:
            return ""
        preferred = "application/json" if "application/json" in content else sorted(content)[0]
        entry = content.get(preferred) or {}
        return describe_schema(entry.get("schema", {}), self.resolver)

    def _responses(self, operation: dict[str, Any]) -> tuple[ResponseDescriptor, ...]:
        produces = operation.get("produces", self.data.get("produces", [])) or []
        responses = []
        for raw_status, raw_response in (operation.get("responses") or {}).items():
            status = str(raw_status).strip()
            if status.lower() == "default":
                status = "default"
            elif re.fullmatch(r"[1-5][0-9][0-9]", status):
                pass
            elif re.fullmatch(r"[1-5][xX]{2}", status):
                status = status[0] + "XX"
            else:
                logger.warning("Ignoring response with unrecognised status %r", raw_status)
                continue
            response = self.resolver.resolve(raw_response) or {}
            if self.dialect == Dialect.V3:
                content = response.get("content", {}) or {}
                media = frozenset(filter(None, (normalize_media_type(str(t)) for t in content)))
                schema = self._content_schema(content)
            else:
                has_schema = bool(response.get("schema"))
                types = (produces or ["application/json"]) if has_schema else []
                media = frozenset(filter(None, (normalize_media_type(t) for t in types)))
                schema = describe_schema(response.get("schema", {}), self.resolver)
            responses.append(
                ResponseDescriptor(
                    status=status,
                    media_types=media,
                    description=str(response.get("description", "")).strip(),
                    schema=schema,
                )
            )
        return tuple(sorted(responses, key=lambda r: (r.is_default, r.status)))

    # -- top level -------------------------------------------------------
    def base_path(self) -> str:
        if self.dialect == Dialect.V2:
            raw = str(self.data.get("basePath", "") or "")
        else:
            servers = self.data.get("servers") or []
            raw = ""
            if servers and isinstance(servers[0], dict):
                url = str(servers[0].get("url", ""))
                for name, variable in (servers[0].get("variables") or {}).items():
                    url = url.replace("{" + name + "}", str((variable or {}).get("default", "")))
                raw = urlparse(url).path
        raw = raw.rstrip("/")
        if raw and not raw.startswith("/"):
            raw = "/" + raw
        return raw

    def schemas(self) -> tuple[dict[str, Any], dict[str, tuple[str, ...]]]:
        if self.dialect == Dialect.V2:
            raw = self.data.get("definitions") or {}
        else:
            raw = (self.data.get("components") or {}).get("schemas") or {}
        schemas = {str(name): _bare_refs(schema) for name, schema in raw.items()}
        refs = {
            name: tuple(sorted(r for r in self.resolver.schema_refs(raw[name]) if r in schemas))
            for name in schemas
        }
        return schemas, refs

    def operations(self) -> tuple[list[str], list[OperationDescriptor]]:
        paths: list[str] = []
        operations: list[OperationDescriptor] = []
        seen_paths: set[str] = set()
        for raw_path, raw_item in (self.data.get("paths") or {}).items():
            path = normalize_path(raw_path)
            if path in seen_paths:
                raise DuplicateOperation(f"Path {raw_path!r} duplicates {path!r}")
            seen_paths.add(path)
            path_item = self.resolver.resolve(raw_item) or {}
            if not isinstance(path_item, dict):
                raise MalformedDocument(f"Path item for {raw_path} is not a mapping")
            paths.append(path)

            seen_methods: set[str] = set()
            for key, operation in path_item.items():
                method = str(key).upper()
                if method not in HTTP_METHODS:
                    continue
                if method in seen_methods:
                    raise DuplicateOperation(f"{method} {path} is defined twice")
                seen_methods.add(method)
                operation = operation or {}
                raw_parameters = self._merged_parameters(path_item, operation)
                if self.dialect == Dialect.V3:
                    request_types, body_required, request_schema = self._request_v3(operation)
                else:
                    request_types, body_required, request_schema = self._request_v2(operation, raw_parameters)
                refs = self.resolver.schema_refs(operation) | self.resolver.schema_refs(
                    path_item.get("parameters", [])
                )
                operations.append(
                    OperationDescriptor(
                        path=path,
                        method=method,
                        parameters=self._parameters(path, raw_parameters),
                        request_types=request_types,
                        documented_responses=self._responses(operation),
                        body_required=body_required,
                        request_schema=request_schema,
                        operation_id=str(operation.get("operationId", "")),
                        summary=str(operation.get("summary", "") or "").strip(),
                        referenced_schemas=tuple(sorted(refs)),
                    )
                )
        return paths, operations


def load_spec(document: bytes, format_hint: Optional[str] = None) -> ApiSpec:
    """
    Parse an OpenAPI 2.0 or 3.x document into the dialect-neutral ApiSpec.

    Downstream code never sees dialect differences: v2 consumes/produces and
    v3 content maps populate the same request_types / documented_responses.
    """
    data = parse_document(document, format_hint)
    dialect = detect_dialect(data)
    normalizer = _Normalizer(data, dialect)
    paths, operations = normalizer.operations()
    schemas, refs = normalizer.schemas()
    info = data.get("info") or {}

    spec = ApiSpec(
        title=str(info.get("title", "")),
        version_dialect=dialect,
        base_path=normalizer.base_path(),
        paths=tuple(paths),
        operations=tuple(operations),
        schemas=MappingProxyType(schemas),
        schema_refs=MappingProxyType(refs),
    )
    logger.debug("Loaded %s spec %r: %d paths, %d operations", dialect.value, spec.title, len(paths), len(operations))
    return spec


def format_hint_for(path: str) -> Optional[str]:
    extension = os.path.splitext(path)[1].lower()
    if extension == ".json":
        return "json"
    if extension in (".yaml", ".yml"):
        return "yaml"
    return None


def load_spec_file(path: str) -> ApiSpec:
    with open(path, "rb") as f:
        return load_spec(f.read(), format_hint_for(path))
