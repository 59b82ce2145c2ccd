import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("varkit", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "varkit"))

MODELS = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture
def models() -> Path:
    return MODELS


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    results = test_acceptance.RESULTS
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")
