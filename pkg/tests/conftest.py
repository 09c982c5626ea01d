"""Shared fixtures: one full-scale default run reused by the acceptance tests."""

import time

import pytest
from hypothesis import HealthCheck, settings

from gestkin.harness import ScenarioConfig, run_scenario

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """The default four-speaker scenario, run once with full permutations."""
    out = tmp_path_factory.mktemp("default_run")
    t0 = time.perf_counter()
    report = run_scenario(ScenarioConfig(), out, n_perm=10000)
    elapsed = time.perf_counter() - t0
    return report, out, elapsed
