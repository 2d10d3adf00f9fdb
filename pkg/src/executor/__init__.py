from .auth import BaseAuthProvider, create_auth_provider, mint_token
from .log import CapturedBody, ExecutionLog, Interaction, dump_log, parse_log, read_log_file, write_log_file
from .results import (
    FailureBreakdown,
    FailureCategory,
    Outcome,
    TestResult,
    TestStats,
    classify_outcome,
    format_console,
    summarize_results,
)
from .runner import SuiteRunner, execute_suite
from .target import AuthConfig, TargetConfig
