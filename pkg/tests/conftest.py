import math
import re

import pytest

from corner_euler.scenarios import ScenarioSpec
from corner_euler.transport import run_simulation

# the long acceptance runs; each is simulated at most once per session
LONG_RUNS = {
    "A": (ScenarioSpec("A_abs_plus_one", math.pi / 3), 5.0),
    "B": (ScenarioSpec("B_capped_ramp", math.pi / 2, epsilon=0.02), 4.0),
    "C": (ScenarioSpec("C_abs", 2 * math.pi / 3), 10.0),
    "D": (ScenarioSpec("D_odd_reflection", 4 * math.pi / 3), 10.0),
}

_cache = {}


@pytest.fixture(scope="session")
def long_run():
    def get(name):
        if name not in _cache:
            spec, T = LONG_RUNS[name]
            _cache[name] = run_simulation(spec, T=T, dt=1e-2, sample_every=5)
        return _cache[name]

    return get


@pytest.fixture
def criterion(request):
    """Attach a one-line measurement summary to an acceptance criterion."""
    notes = request.config.stash.setdefault(_NOTES, {})

    def note(number, text):
        notes[int(number)] = text

    return note


_NOTES = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if m and getattr(rep, "when", "call") in ("call", "setup"):
                n = int(m.group(1))
                ok = key == "passed"
                outcomes[n] = outcomes.get(n, True) and ok
    if not outcomes:
        return
    notes = config.stash.get(_NOTES, {})
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcomes):
        status = "PASS" if outcomes[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {notes.get(n, '')}".rstrip())
