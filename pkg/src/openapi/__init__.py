from .loader import load_spec, load_spec_file
from .model import (
    ApiSpec,
    Dialect,
    OperationDescriptor,
    ParameterDescriptor,
    ParameterLocation,
    ResponseDescriptor,
)
from .retriever import resolve_schema, retrieve
