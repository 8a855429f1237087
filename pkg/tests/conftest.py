import numpy as np
import pytest

from dplang.distribution import Dataset, named_distribution
from dplang.instances import named_instance
from dplang.universe import mod3_collection, mod3_pair


@pytest.fixture
def pair():
    """The two mod-3 languages {1} + 3k and {1} + (3k+1)."""
    return mod3_pair()


@pytest.fixture
def collection():
    return mod3_collection(padded=True)


@pytest.fixture
def ipp():
    return named_instance("ipp")


@pytest.fixture
def iidp():
    return named_instance("iidp")


@pytest.fixture
def small_ipp_sample():
    # three copies of the anchor and one copy of the private element u3
    return Dataset([1, 1, 1, 3])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def dists():
    return {k: named_distribution(k) for k in ("ipp-d", "ipp-dprime", "iidp-d", "iidp-dprime")}


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, detail, elapsed, limit):
    """Store and print a PASS/FAIL line for an acceptance criterion."""
    ok = passed and (limit is None or elapsed < limit)
    timing = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit is not None else "")
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {timing}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
