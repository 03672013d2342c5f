"""Shared test helpers: the dense eigenvalue oracle and the acceptance
criteria summary printed at the end of the run."""

import numpy as np
import pytest

# pass/fail lines appended by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def dense_smallest(entries, weights, k: int = 1):
    """Independent dense oracle for the generalized pencil (H, diag(w)).

    Deliberately avoids the library's iterative path: plain LAPACK on the
    congruence-transformed dense matrix.
    """
    d = 1.0 / np.sqrt(np.asarray(weights))
    A = entries.toarray() * d[None, :] * d[:, None]
    A = (A + A.T) / 2.0
    vals = np.linalg.eigvalsh(A)
    return vals[:k] if k > 1 else float(vals[0])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20180711)
