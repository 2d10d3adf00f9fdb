from .domains import enumerate_coverage_domains
from .engine import compute_report, coverage_of, observe
from .matcher import MatchedInteraction, match_interaction, match_path, match_request
from .model import (
    CoverageDomains,
    CoverageObservations,
    CoverageReport,
    CoverageSets,
    Criterion,
    CriterionResult,
)
