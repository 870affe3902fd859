import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, grouping its parts."""
    parts = {}
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                parts.setdefault(props["criterion"], []).append((props.get("part", ""), outcome == "passed"))
    if not parts:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(parts, key=int):
        failed = [name for name, ok in parts[crit] if not ok]
        line = f"{'FAIL' if failed else 'PASS'}  criterion {crit}"
        if failed:
            line += "  (failing: " + ", ".join(failed) + ")"
        terminalreporter.write_line(line)
