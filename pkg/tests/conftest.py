import os

import pytest
from hypothesis import HealthCheck, settings

from hmdsim import engine, workload
from hmdsim.telemetry import TelemetryConfig

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not mark.args:
        return
    number, title = mark.args
    if rep.when == "setup":
        # fixture time (shared grids, training) counts toward the criterion
        _ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL", rep.duration)
    elif rep.when == "call":
        _ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL", _ACCEPTANCE[number][2] + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2} {verdict}  {title}  ({seconds:.1f}s)")


@pytest.fixture(scope="session")
def small_shifting():
    return workload.gen_shifting(128, 16, 2000, 20_000, seed=3, compute_ns_per_access=100)


@pytest.fixture
def make_config():
    def make(trace, policy, alloc=0.25, phi=0.0, interval=1e-3, **kw):
        return engine.SimConfig(
            tenants=(engine.TenantConfig(trace, policy, alloc),),
            telemetry=TelemetryConfig(marking_interval=interval),
            link=engine.LinkSettings(background_fraction=phi),
            **kw,
        )

    return make
