import numpy as np
import pytest
from hypothesis import settings

from medboot.dataset import from_columns

settings.register_profile("medboot", deadline=None, max_examples=60)
settings.load_profile("medboot")

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    def _record(criterion, passed, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_ds(x, m, y, aux=(), mask=None):
    cols = {"x": x, "m": m, "y": y}
    roles = {"x": "X", "m": "M", "y": "Y"}
    for i, a in enumerate(aux):
        cols[f"a{i + 1}"] = a
        roles[f"a{i + 1}"] = "AUX"
    return from_columns(cols, roles, mask=mask)


def random_mediation(rng, n, a=0.39, b=0.39, c=0.0, n_aux=0):
    x = rng.standard_normal(n)
    m = a * x + rng.standard_normal(n)
    y = b * m + c * x + rng.standard_normal(n)
    aux = [0.5 * m + rng.standard_normal(n), 0.5 * y + rng.standard_normal(n)][:n_aux]
    return make_ds(x, m, y, aux)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
