from src.coverage.model import CoverageDomains
from src.openapi.model import ApiSpec


def enumerate_coverage_domains(spec: ApiSpec) -> CoverageDomains:
    """
    Build the denominator set of every coverage criterion.

    `default` responses never enter the status or status-class sets; a range
    entry such as 4XX contributes its class but no status code.
    """
    operations = set()
    statuses = set()
    status_classes = set()
    response_types = set()
    request_types = set()
    parameters = set()
    parameter_values = set()

    for operation in spec.operations:
        op = operation.key
        operations.add(op)
        for response in operation.documented_responses:
            if response.code is not None:
                statuses.add((op, response.code))
            if response.status_class is not None:
                status_classes.add((op, response.status_class))
            for media_type in response.media_types:
                response_types.add((op, media_type))
        for media_type in operation.request_types:
            request_types.add((op, media_type))
        for parameter in operation.parameters:
            parameters.add((op, parameter.key))
            for literal in parameter.enum_values or ():
                parameter_values.add((op, parameter.key, literal))

    return CoverageDomains(
        paths=frozenset(spec.paths),
        operations=frozenset(operations),
        statuses=frozenset(statuses),
        status_classes=frozenset(status_classes),
        response_types=frozenset(response_types),
        request_types=frozenset(request_types),
        parameters=frozenset(parameters),
        parameter_values=frozenset(parameter_values),
    )
