"""Shared pytest fixtures for all tests.

FIXTURE PHILOSOPHY:
- Put INFRASTRUCTURE here (random generators, hypothesis profiles, report paths)
- Keep TEST DATA in test files (states, protocols, expected ledgers)

This keeps tests self-documenting and easy to read.
"""

from pathlib import Path
import sys

from hypothesis import HealthCheck, settings
import numpy as np
import pytest


PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))


# Bounded, deterministic property runs
settings.register_profile(
    "statemark",
    max_examples=100,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("statemark")


@pytest.fixture
def rng():
    """Seeded generator so numeric tests are reproducible."""
    return np.random.default_rng(20240611)


@pytest.fixture
def report_path(tmp_path):
    """Where CLI tests ask for the JSON report."""
    return tmp_path / "report.json"


# Add infrastructure fixtures here (generators, paths, etc.)
# Do NOT add test data fixtures (keep those in individual test files)
