import numpy as np
import pytest
from hypothesis import settings

from sentinel.retdist import AtomSupport, CategoricalReturnDistribution

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def support11():
    return AtomSupport(0.0, 10.0, 11)


def random_dist(rng, support, concentration=0.5):
    return CategoricalReturnDistribution(support, rng.dirichlet(np.full(support.n_atoms, concentration)))


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(label: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((label, bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0].split()[1])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
