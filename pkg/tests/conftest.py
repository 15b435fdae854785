import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--update-golden",
        action="store_true",
        default=False,
        help="rewrite the committed golden CSV files instead of comparing",
    )


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def within_sigma(count, n, p, k=3.0):
    """Binomial frequency ``count/n`` lies within ``k`` sigma of ``p``."""
    sigma = np.sqrt(p * (1 - p) / n)
    return abs(count / n - p) <= k * sigma


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record and assert one acceptance criterion.

    ``checks`` maps a short label to a bool; the line printed in the terminal
    summary lists every failing label.
    """

    def record(number: int, title: str, checks: dict[str, bool], elapsed: float):
        failed = [k for k, ok in checks.items() if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {number} {status} {title} ({elapsed:.2f} s)"
        if failed:
            line += " failing: " + "; ".join(failed)
        _CRITERIA.append(line)
        print(line)
        assert not failed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
