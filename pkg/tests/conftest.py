import numpy as np
import pytest

_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(label: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
    _RESULTS.append((label, passed, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(_RESULTS, key=lambda r: int(r[0].split()[1])):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unit(rng, n):
    x = rng.standard_normal(n)
    return x / np.linalg.norm(x)
