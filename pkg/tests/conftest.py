from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from es3asim.config import default_scenario, validate_scenario

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN = Path(__file__).parent / "golden"


def tiny_dict(**run) -> dict:
    """Six UEs, two single-BS domains with two NF slots each."""
    data = json.loads((GOLDEN / "tiny_es3a.json").read_text())
    data["run"].update(run)
    return data


@pytest.fixture(scope="session")
def default_cfg():
    return default_scenario()


@pytest.fixture
def tiny_cfg():
    return validate_scenario(tiny_dict())


# acceptance lines collected by test_acceptance.py and echoed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


def threat(duration_ms: float, sir: bool = True, ddos: float | None = None, poison: float | None = None,
           adversarial: int | None = None, scope: str = "infected", p_inf: float | None = None) -> dict:
    """A ``threat`` section with the given attacks enabled over ``[0, duration_ms)``."""
    def atk(kind, value, **kw):
        return {"kind": kind, "intensity": value if value is not None else 0.0, "start": 0.0,
                "end": float(duration_ms), "enabled": value is not None, "scope": scope, **kw}

    s = {"enabled": sir}
    if p_inf is not None:
        s["p_inf"] = p_inf
    return {"sir": s, "attacks": [atk("Ddos", ddos, target=1), atk("Poisoning", poison),
                                  atk("Adversarial", adversarial)]}
