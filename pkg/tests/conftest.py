import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def block_cache():
    """Directory for assembled blocks shared by the slow tests."""
    path = Path(os.environ.get("TDBEM_CACHE_DIR", ROOT / ".cache" / "blocks"))
    path.mkdir(parents=True, exist_ok=True)
    return str(path)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Criterion number -> (passed, detail); printed in the terminal summary."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
