import numpy as np
import pytest

from notf.tensor import FactorTriple


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_triple(rng):
    def make(dims=(3, 4, 5), rank=2, signed=False):
        draw = (lambda s: rng.standard_normal(s)) if signed else (lambda s: rng.random(s))
        return FactorTriple(*(draw((n, rank)) for n in dims))
    return make


def triple_loop_cp(f):
    """Brute-force sum_r A[i,r] B[j,r] C[k,r]."""
    n1, n2, n3 = f.dims
    out = np.zeros((n1, n2, n3))
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                out[i, j, k] = sum(f.A[i, r] * f.B[j, r] * f.C[k, r] for r in range(f.rank))
    return out


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
