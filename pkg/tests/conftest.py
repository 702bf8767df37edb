import os
import tempfile

import numpy as np
import pytest

# keep the relator cache out of the working tree during tests
os.environ.setdefault("GHLAB_CACHE_DIR", tempfile.mkdtemp(prefix="ghlab-cache-"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def octagon():
    from ghlab.surface_rep import octagon_fuchsian

    return octagon_fuchsian()


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
