import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if not detail and rep.failed:
        crash = getattr(rep.longrepr, "reprcrash", None)
        detail = crash.message.splitlines()[0] if crash else "error"
    cid, title = mark.args
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    item.config._criteria[str(cid)] = (status, title, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.write_sep("=", "acceptance criteria")

    def key(c):
        head = c.rstrip("+abcdefghijklmnopqrstuvwxyz")
        return (int(head) if head.isdigit() else 99, c)

    for cid in sorted(crit, key=key):
        status, title, detail = crit[cid]
        terminalreporter.write_line(f"[{status}] criterion {cid}: {title} | {detail}")
