from .codec import (
    extract_suite_document,
    merge_suites,
    parse_suite,
    read_suite_file,
    render_suite,
    suite_from_dict,
    suite_to_dict,
)
from .linter import count_by_kind, validate_suite, validate_test
from .model import (
    Assertion,
    AssertionKind,
    HttpStep,
    IssueKind,
    RefinementIssue,
    TestCase,
    TestSuite,
)
