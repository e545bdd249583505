"""Test-wide setup.

Thread pinning must happen before numpy first loads anywhere in the test
process: single-threaded BLAS is what makes training bit-reproducible, and
several tests assert exact digests.
"""
import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(_var, "1")

import pytest  # noqa: E402

_ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_record():
    """Collect one (criterion, passed, detail) line for the final summary."""

    def record(criterion: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE_RESULTS.append((criterion, passed, detail))
        print(f"{criterion}: {'PASS' if passed else 'FAIL'} - {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{criterion}: {status} - {detail}")
