import numpy as np
import pytest
import torch


def T(*vals):
    return torch.tensor(vals, dtype=torch.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def close(a, b, atol=1e-12, rtol=0.0):
    a = a.detach().numpy() if isinstance(a, torch.Tensor) else np.asarray(a)
    b = b.detach().numpy() if isinstance(b, torch.Tensor) else np.asarray(b)
    np.testing.assert_allclose(a, b, atol=atol, rtol=rtol)


CRITERIA = []


@pytest.fixture
def criterion(capsys):
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
