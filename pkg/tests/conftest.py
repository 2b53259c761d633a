import os

import numpy as np
import pytest

from trifield import meshgen


def pytest_collection_modifyitems(config, items):
    if os.environ.get("TRIFIELD_EXTENDED"):
        return
    skip = pytest.mark.skip(reason="extended check; set TRIFIELD_EXTENDED=1 to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square8():
    return meshgen.unit_square(8)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(RESULTS, key=lambda r: r.number):
        terminalreporter.write_line(r.line())
        for d in r.details:
            terminalreporter.write_line("    " + d)
